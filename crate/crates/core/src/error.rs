use core::fmt;

use crate::raster::Coord;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numerical core.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Two rasters that must share a spatial frame do not.
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A flat buffer does not have the length implied by its shape.
    LengthMismatch { expected: usize, found: usize },
    /// A raster or parameter held NaN or an infinity.
    NonFinite,
    /// An edge map held a negative value.
    NegativeValue,
    /// A cube needs at least two bands for spectral angles.
    TooFewBands(usize),
    BandOutOfRange { index: usize, bands: usize },
    /// A requested raster dimension was zero.
    ZeroDimension,
    /// A value that must lie in `[0, 1]` did not.
    ValueOutOfRange { value: f64 },
    EmptySalient,
    PointOutOfBounds { point: Coord, frame: (usize, usize) },
    BackgroundIsSalient,
    /// An annotated point sits on a barrier pixel.
    PointOnEdge { point: Coord },
    InvalidParameter(&'static str),
    TooFewLevels { levels: usize, required: usize },
    NonBinaryGroundTruth,
    ShapeMismatch(&'static str),
}

impl Error {
    /// Stable machine-readable identifier, used by the CLI and HTTP layers.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::NonFinite => "non-finite",
            Error::NegativeValue => "negative-value",
            Error::TooFewBands(_) => "too-few-bands",
            Error::BandOutOfRange { .. } => "band-out-of-range",
            Error::ZeroDimension => "zero-dimension",
            Error::ValueOutOfRange { .. } => "value-out-of-range",
            Error::EmptySalient => "empty-salient",
            Error::PointOutOfBounds { .. } => "point-out-of-bounds",
            Error::BackgroundIsSalient => "background-is-salient",
            Error::PointOnEdge { .. } => "point-on-edge",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::TooFewLevels { .. } => "too-few-levels",
            Error::NonBinaryGroundTruth => "non-binary-ground-truth",
            Error::ShapeMismatch(_) => "shape-mismatch",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::LengthMismatch { expected, found } => {
                write!(f, "buffer length {found} does not match shape (expected {expected})")
            }
            Error::NonFinite => f.write_str("non-finite value"),
            Error::NegativeValue => f.write_str("edge strength must be non-negative"),
            Error::TooFewBands(b) => write!(f, "cube has {b} band(s); at least 2 are required"),
            Error::BandOutOfRange { index, bands } => {
                write!(f, "band index {index} out of range for {bands} bands")
            }
            Error::ZeroDimension => f.write_str("raster dimensions must be at least 1"),
            Error::ValueOutOfRange { value } => write!(f, "value {value} outside [0, 1]"),
            Error::EmptySalient => f.write_str("at least one salient point is required"),
            Error::PointOutOfBounds { point, frame } => write!(
                f,
                "point ({}, {}) outside {}x{} frame",
                point.0, point.1, frame.0, frame.1
            ),
            Error::BackgroundIsSalient => {
                f.write_str("background point coincides with a salient point")
            }
            Error::PointOnEdge { point } => {
                write!(f, "point ({}, {}) lies on an edge barrier", point.0, point.1)
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::TooFewLevels { levels, required } => {
                write!(f, "{levels} pyramid level(s) requested; at least {required} required")
            }
            Error::NonBinaryGroundTruth => f.write_str("ground truth must contain only 0 and 1"),
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
        }
    }
}

impl core::error::Error for Error {}
