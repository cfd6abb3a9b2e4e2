use hypersal_core::crf::{CrfParams, UNARY_EPSILON};
use hypersal_core::{RgbImage, SaliencyMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Straight O(N²) mean field over every pixel pair, in the textbook
/// exponent-and-normalize form.
pub fn reference_crf(prob: &[f64], guide: &[Vec<f64>], h: usize, w: usize, p: &CrfParams) -> Vec<f64> {
    let n = h * w;
    let clamp = |v: f64| v.clamp(UNARY_EPSILON, 1.0 - UNARY_EPSILON);
    let u_fg: Vec<f64> = prob.iter().map(|&v| -clamp(v).ln()).collect();
    let u_bg: Vec<f64> = prob.iter().map(|&v| -clamp(1.0 - v).ln()).collect();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dy = (i / w) as f64 - (j / w) as f64;
            let dx = (i % w) as f64 - (j % w) as f64;
            let pos = dy * dy + dx * dx;
            let val: f64 = guide.iter().map(|ch| (ch[i] - ch[j]).powi(2)).sum();
            kernel[i * n + j] = p.w_bilateral
                * (-pos / (2.0 * p.theta_alpha.powi(2)) - val / (2.0 * p.theta_beta.powi(2))).exp()
                + p.w_spatial * (-pos / (2.0 * p.theta_gamma.powi(2))).exp();
        }
    }
    let mut q: Vec<f64> = prob.iter().map(|&v| clamp(v)).collect();
    for _ in 0..p.iterations {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let mut e_fg = u_fg[i];
                let mut e_bg = u_bg[i];
                for j in 0..n {
                    e_fg += kernel[i * n + j] * (1.0 - q[j]);
                    e_bg += kernel[i * n + j] * q[j];
                }
                let a = (-e_fg).exp();
                let b = (-e_bg).exp();
                a / (a + b)
            })
            .collect();
        q = next;
    }
    q
}

pub fn random_instance(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (SaliencyMap, RgbImage) {
    let prob = SaliencyMap::from_fn(h, w, |_, _| rng.random_range(0.0..1.0)).unwrap();
    let planes = [0, 1, 2].map(|_| (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<f64>>());
    (prob, RgbImage::new(h, w, planes).unwrap())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
