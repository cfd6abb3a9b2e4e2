//! Raster containers shared by every stage of the pipeline.

use alloc::vec::Vec;

use crate::{Error, Result};

/// A `(row, col)` pixel coordinate.
pub type Coord = (usize, usize);

/// Dense row-major 2-D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension);
        }
        if data.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                found: data.len(),
            });
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn contains(&self, (row, col): Coord) -> bool {
        row < self.height && col < self.width
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Copy> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, alloc::vec![value; height * width])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let i = row * self.width + col;
        self.data[i] = value;
    }
}

/// Checks that two frames agree.
pub(crate) fn ensure_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// A hyperspectral radiance cube, band-sequential (`band`, `row`, `col`).
#[derive(Clone, Debug, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f32>,
    wavelengths: Option<Vec<f64>>,
}

impl HyperCube {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension);
        }
        if bands < 2 {
            return Err(Error::TooFewBands(bands));
        }
        let expected = height * width * bands;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
            wavelengths: None,
        })
    }

    /// Builds a cube from `f(row, col, band)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(r, c, b));
                }
            }
        }
        Self::new(height, width, bands, data)
    }

    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != self.bands {
            return Err(Error::LengthMismatch {
                expected: self.bands,
                found: wavelengths.len(),
            });
        }
        if wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.wavelengths = Some(wavelengths);
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[band * plane..(band + 1) * plane]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        self.data[(band * self.height + row) * self.width + col]
    }
}

/// A scalar field over the image frame (saliency, prediction, probability).
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap(Grid<f64>);

impl SaliencyMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Grid::new(height, width, data).map(Self)
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let grid = Grid::from_fn(height, width, f)?;
        Self::new(height, width, grid.into_vec())
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, alloc::vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0.data
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }

    /// Fails unless every value lies in `[0, 1]`.
    pub fn ensure_unit_range(&self) -> Result<()> {
        match self.0.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            Some(&value) => Err(Error::ValueOutOfRange { value }),
            None => Ok(()),
        }
    }

    /// Min-max normalizes to `[0, 1]`; a constant map becomes all zeros.
    pub fn normalized(&self) -> Self {
        let mut data = self.0.data.clone();
        normalize_min_max(&mut data);
        Self(Grid {
            height: self.0.height,
            width: self.0.width,
            data,
        })
    }
}

/// Rescales `values` to `[0, 1]` in place. When `max == min` every value
/// becomes 0.
pub fn normalize_min_max(values: &mut [f64]) {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(max > min) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let range = max - min;
    for v in values.iter_mut() {
        *v = ((*v - min) / range).clamp(0.0, 1.0);
    }
}

/// Edge strength, finite and non-negative. Merged maps may exceed 1.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap(Grid<f64>);

impl EdgeMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if data.iter().any(|&v| v < 0.0) {
            return Err(Error::NegativeValue);
        }
        Grid::new(height, width, data).map(Self)
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, alloc::vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }
}

impl From<EdgeMap> for SaliencyMap {
    fn from(e: EdgeMap) -> Self {
        SaliencyMap(e.0)
    }
}

/// Three-channel planar image with values clamped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    planes: [Vec<f64>; 3],
}

impl RgbImage {
    /// Builds an image from R, G, B planes. Values are clamped into `[0, 1]`.
    pub fn new(height: usize, width: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut planes = planes;
        for plane in planes.iter_mut() {
            if plane.len() != height * width {
                return Err(Error::LengthMismatch {
                    expected: height * width,
                    found: plane.len(),
                });
            }
            if plane.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            plane.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        }
        Ok(Self {
            height,
            width,
            planes,
        })
    }

    /// Replicates a gray map into all three channels.
    pub fn from_gray(map: &SaliencyMap) -> Result<Self> {
        let p = map.as_slice().to_vec();
        Self::new(map.height(), map.width(), [p.clone(), p.clone(), p])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        &self.planes[channel]
    }

    pub fn planes(&self) -> &[Vec<f64>; 3] {
        &self.planes
    }

    pub fn get(&self, row: usize, col: usize) -> [f64; 3] {
        let i = row * self.width + col;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }
}

/// Read access to a multi-channel guidance raster (RGB or single-channel).
pub trait Guidance: Sync {
    fn dims(&self) -> (usize, usize);
    fn channels(&self) -> usize;
    fn plane(&self, channel: usize) -> &[f64];

    /// Squared Euclidean distance between the values at flat indices `a` and `b`.
    #[inline]
    fn value_distance2(&self, a: usize, b: usize) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.channels() {
            let p = self.plane(c);
            let d = p[a] - p[b];
            acc += d * d;
        }
        acc
    }
}

impl Guidance for RgbImage {
    fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn channels(&self) -> usize {
        3
    }

    fn plane(&self, channel: usize) -> &[f64] {
        &self.planes[channel]
    }
}

impl Guidance for SaliencyMap {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    fn channels(&self) -> usize {
        1
    }

    fn plane(&self, _channel: usize) -> &[f64] {
        &self.0.data
    }
}

impl Guidance for EdgeMap {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    fn channels(&self) -> usize {
        1
    }

    fn plane(&self, _channel: usize) -> &[f64] {
        &self.0.data
    }
}

/// Barrier map for flood filling (`true` blocks).
pub type BinaryEdgeMap = Grid<bool>;

/// Binary segmentation mask.
pub type BinaryMask = Grid<bool>;

/// Per-pixel pseudo-label state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Background,
    Unknown,
    Foreground,
}

/// Three-state pseudo-label raster.
pub type TriMask = Grid<Label>;

impl TriMask {
    /// Counts of `(foreground, background, unknown)` pixels.
    pub fn label_counts(&self) -> (usize, usize, usize) {
        self.as_slice()
            .iter()
            .fold((0, 0, 0), |(fg, bg, un), l| match l {
                Label::Foreground => (fg + 1, bg, un),
                Label::Background => (fg, bg + 1, un),
                Label::Unknown => (fg, bg, un + 1),
            })
    }
}

/// Point annotation: one or more salient points plus one background point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    frame: (usize, usize),
    salient: Vec<Coord>,
    background: Coord,
}

impl PointSet {
    pub fn new(frame: (usize, usize), salient: Vec<Coord>, background: Coord) -> Result<Self> {
        if frame.0 == 0 || frame.1 == 0 {
            return Err(Error::ZeroDimension);
        }
        if salient.is_empty() {
            return Err(Error::EmptySalient);
        }
        for &point in salient.iter().chain(core::iter::once(&background)) {
            if point.0 >= frame.0 || point.1 >= frame.1 {
                return Err(Error::PointOutOfBounds { point, frame });
            }
        }
        if salient.contains(&background) {
            return Err(Error::BackgroundIsSalient);
        }
        Ok(Self {
            frame,
            salient,
            background,
        })
    }

    pub fn frame(&self) -> (usize, usize) {
        self.frame
    }

    pub fn salient(&self) -> &[Coord] {
        &self.salient
    }

    pub fn background(&self) -> Coord {
        self.background
    }

    /// Maps every point into a `frame` obtained by scaling with `scale`:
    /// coordinates are floored and clamped into the new frame. Distinct
    /// salient points may merge; the background may collide with a salient
    /// point, which is reported as an error.
    pub fn rescaled(&self, frame: (usize, usize), scale: f64) -> Result<Self> {
        let map = |(r, c): Coord| -> Coord {
            let r = libm::floor(r as f64 * scale) as usize;
            let c = libm::floor(c as f64 * scale) as usize;
            (r.min(frame.0 - 1), c.min(frame.1 - 1))
        };
        let mut salient: Vec<Coord> = Vec::with_capacity(self.salient.len());
        for &p in &self.salient {
            let q = map(p);
            if !salient.contains(&q) {
                salient.push(q);
            }
        }
        Self::new(frame, salient, map(self.background))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cube_rejects_bad_shapes() {
        assert_eq!(
            HyperCube::new(4, 4, 8, vec![0.0; 100]),
            Err(Error::LengthMismatch {
                expected: 128,
                found: 100
            })
        );
        assert_eq!(HyperCube::new(2, 2, 1, vec![0.0; 4]), Err(Error::TooFewBands(1)));
        assert_eq!(
            HyperCube::new(1, 1, 2, vec![0.0, f32::NAN]),
            Err(Error::NonFinite)
        );
    }

    #[test]
    fn cube_layout_is_band_sequential() {
        let cube = HyperCube::from_fn(2, 3, 2, |r, c, b| (100 * b + 10 * r + c) as f32).unwrap();
        assert_eq!(cube.get(1, 2, 1), 112.0);
        assert_eq!(cube.band(1)[5], 112.0);
        assert_eq!(cube.as_slice()[6 + 5], 112.0);
    }

    #[test]
    fn point_set_validation() {
        let ok = PointSet::new((100, 100), vec![(10, 20)], (90, 90)).unwrap();
        assert_eq!(ok.salient().len(), 1);
        assert_eq!(
            PointSet::new((100, 100), vec![], (90, 90)),
            Err(Error::EmptySalient)
        );
        assert!(matches!(
            PointSet::new((100, 100), vec![(10, 20)], (100, 5)),
            Err(Error::PointOutOfBounds { .. })
        ));
        assert_eq!(
            PointSet::new((10, 10), vec![(1, 1)], (1, 1)),
            Err(Error::BackgroundIsSalient)
        );
    }

    #[test]
    fn rescaling_points_floors_coordinates() {
        let p = PointSet::new((128, 128), vec![(64, 65), (65, 64)], (5, 5)).unwrap();
        let q = p.rescaled((64, 64), 0.5).unwrap();
        assert_eq!(q.salient(), &[(32, 32)]);
        assert_eq!(q.background(), (2, 2));
    }

    #[test]
    fn rgb_clamps_and_normalize_handles_constants() {
        let img = RgbImage::new(1, 2, [vec![-1.0, 2.0], vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(img.get(0, 0), [0.0, 0.5, 0.0]);
        assert_eq!(img.get(0, 1), [1.0, 0.5, 1.0]);
        let mut v = vec![3.0, 3.0, 3.0];
        normalize_min_max(&mut v);
        assert_eq!(v, vec![0.0; 3]);
    }

    #[test]
    fn edge_map_rejects_negative() {
        assert_eq!(EdgeMap::new(1, 1, vec![-0.1]), Err(Error::NegativeValue));
    }
}
