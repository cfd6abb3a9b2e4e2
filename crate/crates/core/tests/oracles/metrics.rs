use hypersal_core::{Grid, SaliencyMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_case(rng: &mut ChaCha8Rng) -> (SaliencyMap, Grid<bool>) {
    let h = rng.random_range(1..=12);
    let w = rng.random_range(1..=12);
    let kind = rng.random_range(0..6);
    let fg_rate = match kind {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.05..0.95),
    };
    let gt = Grid::from_fn(h, w, |_, _| rng.random_bool(fg_rate)).unwrap();
    let pred = match kind {
        2 => SaliencyMap::filled(h, w, rng.random_range(0.0..=1.0)).unwrap(),
        // quantized values exercise ties with the sweep thresholds
        3 => SaliencyMap::from_fn(h, w, |_, _| rng.random_range(0..=255) as f64 / 255.0).unwrap(),
        _ => SaliencyMap::from_fn(h, w, |_, _| rng.random_range(0.0..=1.0)).unwrap(),
    };
    (pred, gt)
}

/// Counts every threshold from scratch.
pub fn reference_roc(pred: &[f64], gt: &[bool]) -> Vec<(f64, f64)> {
    let pos = gt.iter().filter(|&&g| g).count();
    let neg = gt.len() - pos;
    (0..256)
        .map(|k| {
            let t = 1.0 - k as f64 / 255.0;
            let mut tp = 0;
            let mut fp = 0;
            for (&p, &g) in pred.iter().zip(gt) {
                if p >= t {
                    if g {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            let fpr = if neg == 0 { 0.0 } else { fp as f64 / neg as f64 };
            let tpr = if pos == 0 { 0.0 } else { tp as f64 / pos as f64 };
            (fpr, tpr)
        })
        .collect()
}
