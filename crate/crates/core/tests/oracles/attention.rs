use hypersal_core::attention::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn naive_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

pub fn naive_project(x: &[Vec<f64>], w: &Mat) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| (0..w.cols()).map(|j| (0..w.rows()).map(|k| row[k] * w.get(k, j)).sum()).collect())
        .collect()
}

/// `softmax(q·kᵀ/√C)·v` with explicit loops.
pub fn naive_attention(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = q[0].len() as f64;
    q.iter()
        .map(|qi| {
            let logits: Vec<f64> = k.iter().map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / c.sqrt()).collect();
            let a = naive_softmax(&logits);
            (0..v[0].len()).map(|d| a.iter().zip(v).map(|(w, vj)| w * vj[d]).sum()).collect()
        })
        .collect()
}

pub fn assert_close(got: &Mat, want: &[Vec<f64>], tol: f64) {
    for (r, row) in want.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            assert!((got.get(r, c) - v).abs() <= tol, "({r}, {c}): {} vs {v}", got.get(r, c));
        }
    }
}
