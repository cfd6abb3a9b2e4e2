//! Two-label dense CRF refinement by synchronous mean-field iteration, and
//! the mask intersection used to combine refinements guided by the
//! false-color image and by spectral saliency.
//!
//! Pairwise kernel between pixels `i ≠ j`:
//!
//! ```text
//! k(i,j) = w_bilateral · exp(−|p_i − p_j|²/2θα² − |I_i − I_j|²/2θβ²)
//!        + w_spatial   · exp(−|p_i − p_j|²/2θγ²)
//! ```
//!
//! with a Potts compatibility. Each iteration reads only the marginals of the
//! previous one.

use alloc::vec;
use alloc::vec::Vec;

use crate::par::for_each_row;
use crate::raster::{ensure_dims, BinaryMask, Grid, Guidance, RgbImage, SaliencyMap};
use crate::{Error, Result};

/// Probability clamp applied before taking unaries.
pub const UNARY_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrfParams {
    pub iterations: usize,
    pub w_spatial: f64,
    pub w_bilateral: f64,
    /// Spatial-kernel standard deviation, pixels.
    pub theta_gamma: f64,
    /// Bilateral-kernel spatial standard deviation, pixels.
    pub theta_alpha: f64,
    /// Bilateral-kernel value standard deviation, guidance units.
    pub theta_beta: f64,
    /// Half-size of the square neighborhood. 0 means every pixel pair.
    pub window_radius: usize,
}

impl Default for CrfParams {
    fn default() -> Self {
        Self {
            iterations: 5,
            w_spatial: 3.0,
            w_bilateral: 4.0,
            theta_gamma: 3.0,
            theta_alpha: 30.0,
            theta_beta: 0.05,
            window_radius: 15,
        }
    }
}

impl CrfParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("CRF iterations must be at least 1"));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.theta_alpha) && positive(self.theta_beta) && positive(self.theta_gamma)) {
            return Err(Error::InvalidParameter("CRF standard deviations must be positive"));
        }
        let weight = |v: f64| v >= 0.0 && v.is_finite();
        if !(weight(self.w_spatial) && weight(self.w_bilateral)) {
            return Err(Error::InvalidParameter("CRF kernel weights must be non-negative"));
        }
        Ok(())
    }
}

/// Spatial exponent tables over a `(2ry+1) × (2rx+1)` offset window.
struct OffsetTables {
    ry: usize,
    rx: usize,
    stride: usize,
    /// `|d|²/2θα²`
    bilateral_pos: Vec<f64>,
    /// `w_spatial · exp(−|d|²/2θγ²)`
    spatial: Vec<f64>,
}

impl OffsetTables {
    fn new(params: &CrfParams, ry: usize, rx: usize) -> Self {
        let stride = 2 * rx + 1;
        let n = (2 * ry + 1) * stride;
        let mut bilateral_pos = Vec::with_capacity(n);
        let mut spatial = Vec::with_capacity(n);
        let (two_a2, two_g2) = (
            2.0 * params.theta_alpha * params.theta_alpha,
            2.0 * params.theta_gamma * params.theta_gamma,
        );
        for dy in -(ry as isize)..=ry as isize {
            for dx in -(rx as isize)..=rx as isize {
                let d2 = (dy * dy + dx * dx) as f64;
                bilateral_pos.push(d2 / two_a2);
                spatial.push(params.w_spatial * libm::exp(-d2 / two_g2));
            }
        }
        Self {
            ry,
            rx,
            stride,
            bilateral_pos,
            spatial,
        }
    }
}

/// Runs mean-field and returns the foreground marginal after every iteration.
pub fn dense_crf_trace<G: Guidance + ?Sized>(
    prob: &SaliencyMap,
    guidance: &G,
    params: &CrfParams,
) -> Result<Vec<SaliencyMap>> {
    params.validate()?;
    ensure_dims(prob.dims(), guidance.dims())?;
    prob.ensure_unit_range()?;
    let (h, w) = prob.dims();

    let q_fg: Vec<f64> = prob
        .as_slice()
        .iter()
        .map(|&p| p.clamp(UNARY_EPSILON, 1.0 - UNARY_EPSILON))
        .collect();
    let q_bg: Vec<f64> = prob
        .as_slice()
        .iter()
        .map(|&p| (1.0 - p).clamp(UNARY_EPSILON, 1.0 - UNARY_EPSILON))
        .collect();

    let dense = params.window_radius == 0;
    let ry = if dense { h - 1 } else { params.window_radius.min(h - 1) };
    let rx = if dense { w - 1 } else { params.window_radius.min(w - 1) };
    let tables = OffsetTables::new(params, ry, rx);
    let two_b2 = 2.0 * params.theta_beta * params.theta_beta;
    let use_bilateral = params.w_bilateral > 0.0;

    let mut current = q_fg.clone();
    let mut trace = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        let mut next = vec![0.0; h * w];
        for_each_row(&mut next, w, |r, row| {
            let r0 = r.saturating_sub(tables.ry);
            let r1 = (r + tables.ry).min(h - 1);
            for (c, slot) in row.iter_mut().enumerate() {
                let i = r * w + c;
                let c0 = c.saturating_sub(tables.rx);
                let c1 = (c + tables.rx).min(w - 1);
                // penalty for label fg is the expected mass of bg neighbors and vice versa
                let (mut pen_fg, mut pen_bg) = (0.0, 0.0);
                for rr in r0..=r1 {
                    let ty = rr + tables.ry - r;
                    for cc in c0..=c1 {
                        let j = rr * w + cc;
                        if j == i {
                            continue;
                        }
                        let t = ty * tables.stride + cc + tables.rx - c;
                        let mut k = tables.spatial[t];
                        if use_bilateral {
                            let e = tables.bilateral_pos[t] + guidance.value_distance2(i, j) / two_b2;
                            k += params.w_bilateral * libm::exp(-e);
                        }
                        let qj = current[j];
                        pen_fg += k * (1.0 - qj);
                        pen_bg += k * qj;
                    }
                }
                let m = pen_fg.min(pen_bg);
                let a = q_fg[i] * libm::exp(-(pen_fg - m));
                let b = q_bg[i] * libm::exp(-(pen_bg - m));
                *slot = a / (a + b);
            }
        });
        trace.push(SaliencyMap::new(h, w, next.clone())?);
        current = next;
    }
    Ok(trace)
}

/// Mean-field refinement of a foreground probability map; returns the final
/// foreground marginal.
pub fn dense_crf_refine<G: Guidance + ?Sized>(
    prob: &SaliencyMap,
    guidance: &G,
    params: &CrfParams,
) -> Result<SaliencyMap> {
    let mut trace = dense_crf_trace(prob, guidance, params)?;
    Ok(trace.pop().expect("at least one iteration"))
}

/// Foreground where the map is `≥ tau`.
pub fn binarize_map(map: &SaliencyMap, tau: f64) -> BinaryMask {
    map.grid().map(|&v| v >= tau)
}

/// Pixel-wise logical AND.
pub fn intersect(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    ensure_dims(a.dims(), b.dims())?;
    Grid::new(
        a.height(),
        a.width(),
        a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| x && y).collect(),
    )
}

/// Refines `pred` once guided by the false-color image and once guided by
/// spectral saliency, binarizes both at `bin_tau` and intersects them.
pub fn refine_saliency(
    pred: &SaliencyMap,
    falsecolor: &RgbImage,
    specsal: &SaliencyMap,
    params_rgb: &CrfParams,
    params_spec: &CrfParams,
    bin_tau: f64,
) -> Result<BinaryMask> {
    ensure_dims(pred.dims(), falsecolor.dims())?;
    ensure_dims(pred.dims(), specsal.dims())?;
    let by_rgb = dense_crf_refine(pred, falsecolor, params_rgb)?;
    let by_spec = dense_crf_refine(pred, specsal, params_spec)?;
    intersect(&binarize_map(&by_rgb, bin_tau), &binarize_map(&by_spec, bin_tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_pairwise_is_identity() {
        let p = SaliencyMap::from_fn(4, 5, |r, c| (r * 5 + c) as f64 / 19.0).unwrap();
        let g = SaliencyMap::filled(4, 5, 0.3).unwrap();
        let params = CrfParams {
            w_spatial: 0.0,
            w_bilateral: 0.0,
            iterations: 3,
            ..CrfParams::default()
        };
        let out = dense_crf_refine(&p, &g, &params).unwrap();
        for (o, &v) in out.as_slice().iter().zip(p.as_slice()) {
            assert_eq!(*o, v.clamp(UNARY_EPSILON, 1.0 - UNARY_EPSILON));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = SaliencyMap::filled(2, 2, 1.5).unwrap();
        let g = SaliencyMap::filled(2, 2, 0.0).unwrap();
        assert!(matches!(
            dense_crf_refine(&p, &g, &CrfParams::default()),
            Err(Error::ValueOutOfRange { .. })
        ));
        let p = SaliencyMap::filled(2, 2, 0.5).unwrap();
        let g = SaliencyMap::filled(2, 3, 0.0).unwrap();
        assert!(dense_crf_refine(&p, &g, &CrfParams::default()).is_err());
        let bad = CrfParams {
            iterations: 0,
            ..CrfParams::default()
        };
        let g = SaliencyMap::filled(2, 2, 0.0).unwrap();
        assert!(dense_crf_refine(&p, &g, &bad).is_err());
    }

    #[test]
    fn intersection_rules() {
        let a = Grid::new(1, 3, alloc::vec![true, true, false]).unwrap();
        let none = Grid::filled(1, 3, false).unwrap();
        assert_eq!(intersect(&a, &a).unwrap(), a);
        assert_eq!(intersect(&a, &none).unwrap(), none);
    }
}
