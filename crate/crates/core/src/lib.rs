#![cfg_attr(not(feature = "std"), no_std)]
//! Numerical core for point-supervised hyperspectral salient object detection.
//!
//! The crate is `no_std` + `alloc` when the default `std` feature is
//! disabled. All file formats, the CLI and the HTTP service live in the
//! companion `hypersal` crate; everything here is a pure function of its
//! inputs.
//!
//! # Modules
//!
//! - [`raster`] – cubes, scalar maps, RGB images, label masks and point sets.
//! - [`resample`] – bilinear / nearest resizing and false-color rendering.
//! - [`saliency`] – Gaussian pyramids and center-surround spectral angle saliency.
//! - [`pseudo_label`] – edge extraction, edge merging and unrestricted flood fill.
//! - [`crf`] – two-label dense CRF mean-field refinement and mask intersection.
//! - [`loss`] – CRF loss, hybrid CRF loss, (partial) binary cross-entropy, with gradients.
//! - [`attention`] – toy-scale gating / guided attention forward and backward passes.
//! - [`metrics`] – MAE, adaptive F-measure, E-measure, ROC/AUC and correlation.
//!
//! # Features
//!
//! - `std` *(default)* – links the standard library.
//! - `rayon` – parallelizes per-row loops. Every parallel loop writes
//!   disjoint rows with no cross-row reduction, so results are bit-identical
//!   for any thread count.
//!
//! Coordinates are `(row, col)`, zero-based, row-major everywhere.

extern crate alloc;

pub mod attention;
pub mod crf;
mod error;
pub mod loss;
pub mod metrics;
mod par;
pub mod pseudo_label;
pub mod raster;
pub mod resample;
pub mod saliency;

pub use error::{Error, Result};
pub use raster::{
    BinaryEdgeMap, BinaryMask, Coord, EdgeMap, Grid, Guidance, HyperCube, Label, PointSet,
    RgbImage, SaliencyMap, TriMask,
};
