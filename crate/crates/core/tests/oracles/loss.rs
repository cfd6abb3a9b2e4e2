use hypersal_core::loss::CrfLossParams;
use hypersal_core::{Grid, Label, RgbImage, SaliencyMap, TriMask};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

/// Direct evaluation: raw Gaussian weights divided by their sum.
pub fn reference_crf_loss(pred: &[f64], guide: &[Vec<f64>], h: usize, w: usize, p: &CrfLossParams) -> f64 {
    let rad = (p.k / 2) as isize;
    let mut total = 0.0;
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = (r * w as isize + c) as usize;
            let mut terms = Vec::new();
            for dy in -rad..=rad {
                for dx in -rad..=rad {
                    let (rr, cc) = (r + dy, c + dx);
                    if (dy, dx) == (0, 0) || rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let j = (rr * w as isize + cc) as usize;
                    let val: f64 = guide.iter().map(|ch| (ch[i] - ch[j]).powi(2)).sum();
                    let f = (-((dy * dy + dx * dx) as f64) / (2.0 * p.sigma_p * p.sigma_p)
                        - val / (2.0 * p.sigma_i * p.sigma_i))
                        .exp();
                    terms.push((j, f));
                }
            }
            let norm: f64 = terms.iter().map(|t| t.1).sum();
            for (j, f) in terms {
                total += (pred[i] - pred[j]).abs() * f / norm;
            }
        }
    }
    total / (h * w) as f64
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

pub fn numeric_grad(x: &[f64], h: usize, w: usize, f: impl Fn(&SaliencyMap) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += STEP;
            minus[i] -= STEP;
            let fp = f(&SaliencyMap::new(h, w, plus).unwrap());
            let fm = f(&SaliencyMap::new(h, w, minus).unwrap());
            (fp - fm) / (2.0 * STEP)
        })
        .collect()
}

pub fn random_pred(rng: &mut ChaCha8Rng, h: usize, w: usize) -> SaliencyMap {
    SaliencyMap::from_fn(h, w, |_, _| rng.random_range(0.05..0.95)).unwrap()
}

pub fn random_rgb(rng: &mut ChaCha8Rng, h: usize, w: usize, spread: f64) -> RgbImage {
    let planes = [0, 1, 2].map(|_| (0..h * w).map(|_| rng.random_range(0.0..spread)).collect::<Vec<f64>>());
    RgbImage::new(h, w, planes).unwrap()
}

pub fn random_label(rng: &mut ChaCha8Rng, h: usize, w: usize) -> TriMask {
    let labels = [Label::Background, Label::Unknown, Label::Foreground];
    Grid::from_fn(h, w, |_, _| labels[rng.random_range(0..3)]).unwrap()
}
