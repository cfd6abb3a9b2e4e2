//! Training objective: CRF loss, hybrid CRF loss, partial BCE and BCE, each
//! with an analytic gradient with respect to the prediction.
//!
//! All losses are means over pixels.

use alloc::vec;
use alloc::vec::Vec;

use crate::raster::{ensure_dims, EdgeMap, Guidance, Label, RgbImage, SaliencyMap, TriMask};
use crate::resample::resize_nearest;
use crate::{Error, Result};

/// Probability clamp for cross-entropy terms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Parameters of one CRF loss term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrfLossParams {
    /// Spatial standard deviation, pixels.
    pub sigma_p: f64,
    /// Guidance-value standard deviation.
    pub sigma_i: f64,
    /// Odd neighborhood side length.
    pub k: usize,
    /// Multiplier applied to the term inside the hybrid loss.
    pub weight: f64,
}

impl CrfLossParams {
    /// False-color term: `σ_P = 5`, `σ_I = 0.03`.
    pub const fn falsecolor() -> Self {
        Self {
            sigma_p: 5.0,
            sigma_i: 0.03,
            k: 5,
            weight: 1.0,
        }
    }

    /// Spectral-saliency term: `σ′_P = 0.003`, `σ′_I = 3`.
    pub const fn spectral() -> Self {
        Self {
            sigma_p: 0.003,
            sigma_i: 3.0,
            k: 5,
            weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p > 0.0 && self.sigma_i > 0.0 && self.sigma_p.is_finite() && self.sigma_i.is_finite()) {
            return Err(Error::InvalidParameter("CRF loss sigmas must be positive"));
        }
        if self.k % 2 == 0 {
            return Err(Error::InvalidParameter("CRF loss neighborhood side must be odd"));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidParameter("CRF loss weight must be non-negative"));
        }
        Ok(())
    }
}

impl Default for CrfLossParams {
    fn default() -> Self {
        Self::falsecolor()
    }
}

/// Normalized affinities `F(i, j)` of `center` to every other pixel in its
/// `k × k` neighborhood (clipped to the image). The weights sum to 1 unless
/// the neighborhood is empty. Normalization is done in the log domain, so
/// very small sigmas still give the limiting weights rather than 0/0.
pub fn crf_affinities<G: Guidance + ?Sized>(
    guidance: &G,
    params: &CrfLossParams,
    center: usize,
) -> Vec<(usize, f64)> {
    let (h, w) = guidance.dims();
    let (r, c) = (center / w, center % w);
    let rad = params.k / 2;
    let two_p2 = 2.0 * params.sigma_p * params.sigma_p;
    let two_i2 = 2.0 * params.sigma_i * params.sigma_i;
    let mut out = Vec::with_capacity(params.k * params.k);
    for rr in r.saturating_sub(rad)..=(r + rad).min(h - 1) {
        for cc in c.saturating_sub(rad)..=(c + rad).min(w - 1) {
            let j = rr * w + cc;
            if j == center {
                continue;
            }
            let dy = rr as f64 - r as f64;
            let dx = cc as f64 - c as f64;
            let e = -(dy * dy + dx * dx) / two_p2 - guidance.value_distance2(center, j) / two_i2;
            out.push((j, e));
        }
    }
    let max = out.iter().fold(f64::NEG_INFINITY, |m, &(_, e)| m.max(e));
    let mut total = 0.0;
    for (_, e) in out.iter_mut() {
        *e = libm::exp(*e - max);
        total += *e;
    }
    for (_, f) in out.iter_mut() {
        *f /= total;
    }
    out
}

fn crf_loss_impl<G: Guidance + ?Sized>(
    pred: &SaliencyMap,
    guidance: &G,
    params: &CrfLossParams,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    params.validate()?;
    ensure_dims(pred.dims(), guidance.dims())?;
    let p = pred.as_slice();
    let n = p.len() as f64;
    let mut total = 0.0;
    for i in 0..p.len() {
        for (j, f) in crf_affinities(guidance, params, i) {
            let d = p[i] - p[j];
            total += libm::fabs(d) * f;
            if let Some(g) = grad.as_deref_mut() {
                let s = if d > 0.0 {
                    f / n
                } else if d < 0.0 {
                    -f / n
                } else {
                    0.0
                };
                g[i] += s;
                g[j] -= s;
            }
        }
    }
    Ok(total / n)
}

/// `(1/N) Σ_i Σ_{j∈K_i, j≠i} |pred_i − pred_j| · F(i, j)` with affinities from
/// [`crf_affinities`]. The term weight is not applied here.
pub fn crf_loss<G: Guidance + ?Sized>(pred: &SaliencyMap, guidance: &G, params: &CrfLossParams) -> Result<f64> {
    crf_loss_impl(pred, guidance, params, None)
}

/// Loss and its (sub)gradient with respect to `pred`. At ties the sign is
/// taken as 0.
pub fn crf_loss_grad<G: Guidance + ?Sized>(
    pred: &SaliencyMap,
    guidance: &G,
    params: &CrfLossParams,
) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; pred.as_slice().len()];
    let l = crf_loss_impl(pred, guidance, params, Some(&mut g))?;
    Ok((l, g))
}

/// Weighted sum of the false-color and spectral CRF terms.
pub fn hybrid_crf_loss(
    pred: &SaliencyMap,
    falsecolor: &RgbImage,
    specsal: &SaliencyMap,
    p_rgb: &CrfLossParams,
    p_spec: &CrfLossParams,
) -> Result<f64> {
    let rgb = if p_rgb.weight == 0.0 {
        0.0
    } else {
        p_rgb.weight * crf_loss(pred, falsecolor, p_rgb)?
    };
    let spec = if p_spec.weight == 0.0 {
        0.0
    } else {
        p_spec.weight * crf_loss(pred, specsal, p_spec)?
    };
    Ok(rgb + spec)
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON)
}

#[inline]
fn cross_entropy(p: f64, y: f64) -> f64 {
    let q = clamp_prob(p);
    -(y * libm::log(q) + (1.0 - y) * libm::log(1.0 - q))
}

#[inline]
fn cross_entropy_grad(p: f64, y: f64) -> f64 {
    if p <= BCE_EPSILON || p >= 1.0 - BCE_EPSILON {
        0.0
    } else {
        -y / p + (1.0 - y) / (1.0 - p)
    }
}

fn definite_target(label: Label) -> Option<f64> {
    match label {
        Label::Foreground => Some(1.0),
        Label::Background => Some(0.0),
        Label::Unknown => None,
    }
}

/// Mean cross-entropy over foreground and background pixels; unknown pixels
/// are skipped. Returns 0 when no pixel is definite.
pub fn partial_bce(pred: &SaliencyMap, label: &TriMask) -> Result<f64> {
    ensure_dims(pred.dims(), label.dims())?;
    let (sum, count) = pred
        .as_slice()
        .iter()
        .zip(label.as_slice())
        .filter_map(|(&p, &l)| definite_target(l).map(|y| cross_entropy(p, y)))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

pub fn partial_bce_grad(pred: &SaliencyMap, label: &TriMask) -> Result<Vec<f64>> {
    ensure_dims(pred.dims(), label.dims())?;
    let count = label
        .as_slice()
        .iter()
        .filter(|l| definite_target(**l).is_some())
        .count();
    Ok(pred
        .as_slice()
        .iter()
        .zip(label.as_slice())
        .map(|(&p, &l)| match definite_target(l) {
            Some(y) => cross_entropy_grad(p, y) / count as f64,
            None => 0.0,
        })
        .collect())
}

/// Mean binary cross-entropy of `pred` against a soft target in `[0, 1]`.
pub fn bce(pred: &SaliencyMap, target: &SaliencyMap) -> Result<f64> {
    ensure_dims(pred.dims(), target.dims())?;
    let n = pred.as_slice().len() as f64;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &y)| cross_entropy(p, y))
        .sum();
    Ok(sum / n)
}

pub fn bce_grad(pred: &SaliencyMap, target: &SaliencyMap) -> Result<Vec<f64>> {
    ensure_dims(pred.dims(), target.dims())?;
    let n = pred.as_slice().len() as f64;
    Ok(pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &y)| cross_entropy_grad(p, y) / n)
        .collect())
}

/// Everything the combined objective can consume. Edge and gate supervision
/// are optional; missing ones contribute 0.
#[derive(Clone, Copy, Debug)]
pub struct LossInputs<'a> {
    pub pred: &'a SaliencyMap,
    pub falsecolor: &'a RgbImage,
    pub specsal: &'a SaliencyMap,
    pub label: &'a TriMask,
    /// Predicted edges and the refined edge map they are supervised by.
    pub edges: Option<(&'a SaliencyMap, &'a EdgeMap)>,
    /// Gate refinement map supervised by the pseudo-label.
    pub gate_ref: Option<&'a SaliencyMap>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParams {
    pub falsecolor: CrfLossParams,
    pub spectral: CrfLossParams,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            falsecolor: CrfLossParams::falsecolor(),
            spectral: CrfLossParams::spectral(),
        }
    }
}

/// Per-term values of the combined objective.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub hybrid_crf: f64,
    pub partial_bce: f64,
    /// BCE of predicted edges against the refined edge map (clamped to 1).
    pub edge_bce: f64,
    /// BCE of the gate refinement map against the definite pseudo-label pixels.
    pub gate_bce: f64,
    /// `edge_bce + gate_bce`
    pub bce: f64,
    /// `hybrid_crf + partial_bce + bce`
    pub total: f64,
}

/// Hybrid CRF + partial BCE + BCE.
pub fn total_loss(inputs: &LossInputs<'_>, params: &LossParams) -> Result<LossBreakdown> {
    let hybrid_crf = hybrid_crf_loss(
        inputs.pred,
        inputs.falsecolor,
        inputs.specsal,
        &params.falsecolor,
        &params.spectral,
    )?;
    let pbce = partial_bce(inputs.pred, inputs.label)?;
    let edge_bce = match inputs.edges {
        Some((edge_pred, edge_gt)) => {
            let target = SaliencyMap::new(
                edge_gt.height(),
                edge_gt.width(),
                edge_gt.as_slice().iter().map(|&v| v.min(1.0)).collect(),
            )?;
            bce(edge_pred, &target)?
        }
        None => 0.0,
    };
    let gate_bce = match inputs.gate_ref {
        Some(gate) => {
            let (h, w) = gate.dims();
            let label = if inputs.label.dims() == (h, w) {
                inputs.label.clone()
            } else {
                resize_nearest(inputs.label, h, w)?
            };
            partial_bce(gate, &label)?
        }
        None => 0.0,
    };
    let bce = edge_bce + gate_bce;
    Ok(LossBreakdown {
        hybrid_crf,
        partial_bce: pbce,
        edge_bce,
        gate_bce,
        bce,
        total: hybrid_crf + pbce + bce,
    })
}
