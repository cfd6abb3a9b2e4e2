//! Trinary pseudo-labels from point annotations.
//!
//! Edges from the false-color image and from the spectral saliency map are
//! summed, thresholded into barriers, and flood filled from every annotated
//! point without any limit on fill extent. Pixels reached from both a salient
//! point and the background point are marked [`Label::Unknown`].

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::raster::{
    ensure_dims, normalize_min_max, BinaryEdgeMap, Coord, EdgeMap, Grid, Guidance, Label, PointSet,
    RgbImage, SaliencyMap, TriMask,
};
use crate::resample::{resize_bilinear, resize_nearest};
use crate::{Error, Result};

/// Sobel gradient magnitude with replicate padding, maximum over channels,
/// min-max normalized to `[0, 1]`.
pub fn gradient_edges<G: Guidance + ?Sized>(image: &G) -> EdgeMap {
    let (h, w) = image.dims();
    let mut out = vec![0.0f64; h * w];
    for ch in 0..image.channels() {
        let p = image.plane(ch);
        let at = |r: isize, c: isize| -> f64 {
            let r = r.clamp(0, h as isize - 1) as usize;
            let c = c.clamp(0, w as isize - 1) as usize;
            p[r * w + c]
        };
        for r in 0..h as isize {
            for c in 0..w as isize {
                let gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                    - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
                let gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                    - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
                let mag = libm::sqrt(gx * gx + gy * gy);
                let slot = &mut out[r as usize * w + c as usize];
                if mag > *slot {
                    *slot = mag;
                }
            }
        }
    }
    normalize_min_max(&mut out);
    EdgeMap::new(h, w, out).expect("normalized magnitudes are finite and non-negative")
}

/// Pixel-wise sum of two edge maps, unclamped.
pub fn merge_edges(a: &EdgeMap, b: &EdgeMap) -> Result<EdgeMap> {
    ensure_dims(a.dims(), b.dims())?;
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect();
    EdgeMap::new(a.height(), a.width(), data)
}

/// Marks every pixel with strength `≥ tau` as a barrier.
pub fn binarize_edges(edges: &EdgeMap, tau: f64) -> Result<BinaryEdgeMap> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter("edge threshold must be a non-negative number"));
    }
    Grid::new(
        edges.height(),
        edges.width(),
        edges.as_slice().iter().map(|&v| v >= tau).collect(),
    )
}

/// Set of pixels 4-connected to `seed` through non-barrier pixels.
pub fn flood_region(barriers: &BinaryEdgeMap, seed: Coord) -> Result<Grid<bool>> {
    let mut reached = Grid::filled(barriers.height(), barriers.width(), false)?;
    fill_into(barriers, seed, &mut reached)?;
    Ok(reached)
}

fn check_seed(barriers: &BinaryEdgeMap, seed: Coord) -> Result<()> {
    if !barriers.contains(seed) {
        return Err(Error::PointOutOfBounds {
            point: seed,
            frame: barriers.dims(),
        });
    }
    if barriers.get(seed.0, seed.1) {
        return Err(Error::PointOnEdge { point: seed });
    }
    Ok(())
}

/// Breadth-first fill from `seed`, marking pixels in `reached`. Pixels already
/// marked are treated as visited.
fn fill_into(barriers: &BinaryEdgeMap, seed: Coord, reached: &mut Grid<bool>) -> Result<()> {
    check_seed(barriers, seed)?;
    let (h, w) = barriers.dims();
    let blocked = barriers.as_slice();
    let seen = reached.as_mut_slice();
    let start = seed.0 * w + seed.1;
    if seen[start] {
        return Ok(());
    }
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / w, i % w);
        let mut visit = |j: usize| {
            if !blocked[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if r > 0 {
            visit(i - w);
        }
        if r + 1 < h {
            visit(i + w);
        }
        if c > 0 {
            visit(i - 1);
        }
        if c + 1 < w {
            visit(i + 1);
        }
    }
    Ok(())
}

/// A pseudo-label together with fill diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabel {
    pub mask: TriMask,
    /// `true` when some salient fill reached the background fill; the shared
    /// region is then [`Label::Unknown`].
    pub leak: bool,
}

impl PseudoLabel {
    /// `(foreground, background, unknown)` pixel counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        self.mask.label_counts()
    }
}

/// Flood fills from every salient point (foreground) and the background
/// point (background). Barriers, unreached pixels and pixels reached by both
/// kinds of fill are unknown.
pub fn flood_fill_labels(barriers: &BinaryEdgeMap, points: &PointSet) -> Result<PseudoLabel> {
    ensure_dims(barriers.dims(), points.frame())?;
    let (h, w) = barriers.dims();
    let mut fg = Grid::filled(h, w, false)?;
    for &p in points.salient() {
        fill_into(barriers, p, &mut fg)?;
    }
    let bg = flood_region(barriers, points.background())?;
    let mut leak = false;
    let labels = fg
        .as_slice()
        .iter()
        .zip(bg.as_slice())
        .map(|(&f, &b)| match (f, b) {
            (true, true) => {
                leak = true;
                Label::Unknown
            }
            (true, false) => Label::Foreground,
            (false, true) => Label::Background,
            (false, false) => Label::Unknown,
        })
        .collect();
    Ok(PseudoLabel {
        mask: Grid::new(h, w, labels)?,
        leak,
    })
}

/// Where an edge term comes from.
#[derive(Clone, Copy, Debug)]
pub enum EdgeInput<'a> {
    /// Sobel edges of the (resized) source image.
    Extract,
    /// A precomputed edge map, e.g. from a learned detector. Resized
    /// bilinearly to the working resolution if needed.
    Supplied(&'a EdgeMap),
    /// Drop the term (all-zero edges).
    Omit,
}

/// Edge sources for the false-color and spectral terms.
#[derive(Clone, Copy, Debug)]
pub struct EdgeInputs<'a> {
    pub falsecolor: EdgeInput<'a>,
    pub spectral: EdgeInput<'a>,
}

impl Default for EdgeInputs<'_> {
    fn default() -> Self {
        Self {
            falsecolor: EdgeInput::Extract,
            spectral: EdgeInput::Extract,
        }
    }
}

/// Working-resolution scale and barrier threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoLabelConfig {
    pub scale: f64,
    pub tau: f64,
}

impl Default for PseudoLabelConfig {
    fn default() -> Self {
        Self { scale: 0.5, tau: 0.5 }
    }
}

impl PseudoLabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter("scale must be positive and finite"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter("tau must be non-negative and finite"));
        }
        Ok(())
    }

    /// Working-resolution size of a dimension: `max(1, round(n·scale))`.
    pub fn scaled(&self, n: usize) -> usize {
        (libm::round(n as f64 * self.scale) as usize).max(1)
    }
}

/// Edge maps at the working resolution.
#[derive(Clone, Debug)]
pub struct WorkingEdges {
    pub falsecolor: EdgeMap,
    pub spectral: EdgeMap,
    pub merged: EdgeMap,
}

fn edge_term<G: Guidance>(input: EdgeInput<'_>, source: &G, dims: (usize, usize)) -> Result<EdgeMap> {
    match input {
        EdgeInput::Extract => Ok(gradient_edges(source)),
        EdgeInput::Supplied(e) if e.dims() == dims => Ok(e.clone()),
        EdgeInput::Supplied(e) => resize_bilinear(e, dims.0, dims.1),
        EdgeInput::Omit => EdgeMap::zeros(dims.0, dims.1),
    }
}

/// Resizes both sources by `config.scale` and returns the two edge terms and
/// their sum.
pub fn working_edges(
    falsecolor: &RgbImage,
    specsal: &SaliencyMap,
    config: &PseudoLabelConfig,
    inputs: EdgeInputs<'_>,
) -> Result<WorkingEdges> {
    config.validate()?;
    ensure_dims(falsecolor.dims(), specsal.dims())?;
    let (h, w) = falsecolor.dims();
    let dims = (config.scaled(h), config.scaled(w));
    let fc_small = resize_bilinear(falsecolor, dims.0, dims.1)?;
    let ss_small = resize_bilinear(specsal, dims.0, dims.1)?;
    let fc_edges = edge_term(inputs.falsecolor, &fc_small, dims)?;
    let ss_edges = edge_term(inputs.spectral, &ss_small, dims)?;
    let merged = merge_edges(&fc_edges, &ss_edges)?;
    Ok(WorkingEdges {
        falsecolor: fc_edges,
        spectral: ss_edges,
        merged,
    })
}

/// Full pseudo-label pipeline with Sobel edges on both sources.
pub fn generate_pseudo_label(
    falsecolor: &RgbImage,
    specsal: &SaliencyMap,
    points: &PointSet,
    config: &PseudoLabelConfig,
) -> Result<PseudoLabel> {
    generate_pseudo_label_with(falsecolor, specsal, points, config, EdgeInputs::default())
}

/// Full pseudo-label pipeline: resize, edges, merge, binarize, fill at the
/// working resolution, then nearest-neighbor upsample to the input frame.
pub fn generate_pseudo_label_with(
    falsecolor: &RgbImage,
    specsal: &SaliencyMap,
    points: &PointSet,
    config: &PseudoLabelConfig,
    inputs: EdgeInputs<'_>,
) -> Result<PseudoLabel> {
    ensure_dims(falsecolor.dims(), points.frame())?;
    let edges = working_edges(falsecolor, specsal, config, inputs)?;
    let barriers = binarize_edges(&edges.merged, config.tau)?;
    let small_points = points.rescaled(barriers.dims(), config.scale)?;
    let small = flood_fill_labels(&barriers, &small_points)?;
    let (h, w) = falsecolor.dims();
    Ok(PseudoLabel {
        mask: resize_nearest(&small.mask, h, w)?,
        leak: small.leak,
    })
}

/// Row-major run-length encoding of a mask.
pub fn run_lengths(mask: &TriMask) -> Vec<(Label, usize)> {
    let mut runs: Vec<(Label, usize)> = Vec::new();
    for &l in mask.as_slice() {
        match runs.last_mut() {
            Some((last, n)) if *last == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    runs
}

/// Inverse of [`run_lengths`].
pub fn from_run_lengths(height: usize, width: usize, runs: &[(Label, usize)]) -> Result<TriMask> {
    let mut data = Vec::with_capacity(height * width);
    for &(l, n) in runs {
        data.extend(core::iter::repeat_n(l, n));
    }
    Grid::new(height, width, data)
}
