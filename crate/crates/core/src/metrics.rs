//! Saliency evaluation metrics.

use alloc::vec::Vec;

use crate::raster::{ensure_dims, BinaryMask, Grid, SaliencyMap};
use crate::{Error, Result};

/// `β²` of the F-measure.
pub const BETA_SQUARED: f64 = 0.3;

/// Number of thresholds on the ROC and max-F sweeps.
pub const THRESHOLDS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub mae: f64,
    /// F-measure at the adaptive threshold.
    pub f_beta: f64,
    /// Best F-measure over the threshold sweep.
    pub max_f_beta: f64,
    pub e_measure: f64,
    pub auc: f64,
    pub cc: f64,
}

/// Binary confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_masks(pred: &[bool], gt: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &g) in pred.iter().zip(gt) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// `(1+β²)·P·R / (β²·P + R)`, or 0 when there are no true positives.
    pub fn f_beta(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        let precision = self.tp as f64 / (self.tp + self.fp) as f64;
        let recall = self.tp as f64 / (self.tp + self.fn_) as f64;
        (1.0 + BETA_SQUARED) * precision * recall / (BETA_SQUARED * precision + recall)
    }
}

/// Converts a 0/1 map into a mask, rejecting anything else.
pub fn binary_ground_truth(map: &SaliencyMap) -> Result<BinaryMask> {
    let data = map
        .as_slice()
        .iter()
        .map(|&v| {
            if v == 1.0 {
                Ok(true)
            } else if v == 0.0 {
                Ok(false)
            } else {
                Err(Error::NonBinaryGroundTruth)
            }
        })
        .collect::<Result<Vec<bool>>>()?;
    Grid::new(map.height(), map.width(), data)
}

/// `min(2·mean(pred), 1)`.
pub fn adaptive_threshold(pred: &SaliencyMap) -> f64 {
    let s = pred.as_slice();
    (2.0 * s.iter().sum::<f64>() / s.len() as f64).min(1.0)
}

fn binarize(pred: &[f64], threshold: f64) -> Vec<bool> {
    pred.iter().map(|&v| v >= threshold).collect()
}

/// Mean absolute error.
pub fn mae(pred: &[f64], gt: &[bool]) -> f64 {
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| libm::fabs(p - if g { 1.0 } else { 0.0 }))
        .sum();
    sum / pred.len() as f64
}

/// Enhanced-alignment measure of a binary prediction. Degenerate ground
/// truths follow the usual convention: all background scores the fraction of
/// predicted background, all foreground scores the fraction of predicted
/// foreground.
pub fn e_measure(pred: &[bool], gt: &[bool]) -> f64 {
    let n = pred.len() as f64;
    let as_f = |b: bool| if b { 1.0 } else { 0.0 };
    let gt_fg = gt.iter().filter(|&&g| g).count();
    let pred_fg = pred.iter().filter(|&&p| p).count() as f64;
    if gt_fg == 0 {
        return 1.0 - pred_fg / n;
    }
    if gt_fg == gt.len() {
        return pred_fg / n;
    }
    let mean_p = pred_fg / n;
    let mean_g = gt_fg as f64 / n;
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let fp = as_f(p) - mean_p;
            let fg = as_f(g) - mean_g;
            let align = 2.0 * fg * fp / (fg * fg + fp * fp);
            (1.0 + align) * (1.0 + align) / 4.0
        })
        .sum();
    sum / n
}

/// Pearson correlation; 0 when either input is constant.
pub fn correlation(pred: &[f64], gt: &[bool]) -> f64 {
    let n = pred.len() as f64;
    let g: Vec<f64> = gt.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mp = pred.iter().sum::<f64>() / n;
    let mg = g.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut vg) = (0.0, 0.0, 0.0);
    for (&p, &q) in pred.iter().zip(&g) {
        let (dp, dg) = (p - mp, q - mg);
        cov += dp * dg;
        vp += dp * dp;
        vg += dg * dg;
    }
    if vp == 0.0 || vg == 0.0 {
        return 0.0;
    }
    (cov / libm::sqrt(vp * vg)).clamp(-1.0, 1.0)
}

/// Threshold `k` of the sweep: `1 − k/255`, descending from 1 to 0.
#[inline]
pub fn sweep_threshold(k: usize) -> f64 {
    1.0 - k as f64 / (THRESHOLDS - 1) as f64
}

/// Per-threshold `(fpr, tpr)` for the 256 sweep thresholds. A rate with an
/// empty denominator is reported as 0.
pub fn roc_curve(pred: &SaliencyMap, gt: &BinaryMask) -> Result<Vec<(f64, f64)>> {
    ensure_dims(pred.dims(), gt.dims())?;
    let positives = gt.as_slice().iter().filter(|&&g| g).count();
    let negatives = gt.len() - positives;
    let mut scored: Vec<(f64, bool)> = pred
        .as_slice()
        .iter()
        .copied()
        .zip(gt.as_slice().iter().copied())
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let rate = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let (mut tp, mut fp, mut cursor) = (0usize, 0usize, 0usize);
    let mut curve = Vec::with_capacity(THRESHOLDS);
    for k in 0..THRESHOLDS {
        let t = sweep_threshold(k);
        while cursor < scored.len() && scored[cursor].0 >= t {
            if scored[cursor].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            cursor += 1;
        }
        curve.push((rate(fp, negatives), rate(tp, positives)));
    }
    Ok(curve)
}

/// Trapezoidal area under a curve that starts at the origin.
pub fn auc_from_curve(curve: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    let mut prev = (0.0, 0.0);
    for &pt in curve {
        area += (pt.0 - prev.0) * (pt.1 + prev.1) / 2.0;
        prev = pt;
    }
    area.clamp(0.0, 1.0)
}

/// Maximum F-measure over the 256 sweep thresholds.
pub fn max_f_beta(pred: &[f64], gt: &[bool]) -> f64 {
    (0..THRESHOLDS)
        .map(|k| Confusion::from_masks(&binarize(pred, sweep_threshold(k)), gt).f_beta())
        .fold(0.0, f64::max)
}

/// Computes every metric of a prediction against a binary ground truth.
pub fn evaluate(pred: &SaliencyMap, gt: &BinaryMask) -> Result<MetricsReport> {
    ensure_dims(pred.dims(), gt.dims())?;
    pred.ensure_unit_range()?;
    let p = pred.as_slice();
    let g = gt.as_slice();
    let threshold = adaptive_threshold(pred);
    let bin = binarize(p, threshold);
    let confusion = Confusion::from_masks(&bin, g);
    let curve = roc_curve(pred, gt)?;
    Ok(MetricsReport {
        mae: mae(p, g),
        f_beta: confusion.f_beta(),
        max_f_beta: max_f_beta(p, g),
        e_measure: e_measure(&bin, g),
        auc: auc_from_curve(&curve),
        cc: correlation(p, g),
    })
}
