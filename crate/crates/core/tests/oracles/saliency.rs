use hypersal_core::HyperCube;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Band-sequential f64 cube used by the reference implementation.
#[derive(Clone)]
pub struct Layer {
    pub h: usize,
    pub w: usize,
    pub d: usize,
    pub v: Vec<f64>,
}

impl Layer {
    fn at(&self, r: usize, c: usize, b: usize) -> f64 {
        self.v[b * self.h * self.w + r * self.w + c]
    }
}

pub fn reference_downsample(l: &Layer) -> Layer {
    let g = [1.0, 4.0, 6.0, 4.0, 1.0].map(|x: f64| x / 16.0);
    let (oh, ow) = (l.h.div_ceil(2), l.w.div_ceil(2));
    let mut v = vec![0.0; oh * ow * l.d];
    for b in 0..l.d {
        for i in 0..oh {
            for j in 0..ow {
                let mut s = 0.0;
                for a in 0..5 {
                    for e in 0..5 {
                        let r = (2 * i as isize + a as isize - 2).clamp(0, l.h as isize - 1) as usize;
                        let c = (2 * j as isize + e as isize - 2).clamp(0, l.w as isize - 1) as usize;
                        s += g[a] * g[e] * l.at(r, c, b);
                    }
                }
                v[b * oh * ow + i * ow + j] = s;
            }
        }
    }
    Layer { h: oh, w: ow, d: l.d, v }
}

pub fn reference_bilinear(src: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let pos = |i: usize, n: usize, on: usize| {
        if on <= 1 {
            0.0
        } else {
            i as f64 * (n - 1) as f64 / (on - 1) as f64
        }
    };
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        let y = pos(i, h, oh);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = y - y0 as f64;
        for j in 0..ow {
            let x = pos(j, w, ow);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = x - x0 as f64;
            let top = src[y0 * w + x0] * (1.0 - tx) + src[y0 * w + x1] * tx;
            let bot = src[y1 * w + x0] * (1.0 - tx) + src[y1 * w + x1] * tx;
            out[i * ow + j] = top * (1.0 - ty) + bot * ty;
        }
    }
    out
}

pub fn reference_saliency(cube: &HyperCube) -> Vec<f64> {
    let (h, w, d) = (cube.height(), cube.width(), cube.bands());
    let mut layers = vec![Layer {
        h,
        w,
        d,
        v: cube.as_slice().iter().map(|&x| x as f64).collect(),
    }];
    for _ in 1..9 {
        let next = reference_downsample(layers.last().unwrap());
        layers.push(next);
    }
    let mut total = vec![0.0; h * w];
    for &(c, s) in &[(2, 5), (2, 6), (3, 6), (3, 7), (4, 7), (4, 8)] {
        let (lc, ls) = (&layers[c], &layers[s]);
        let n = lc.h * lc.w;
        let up: Vec<Vec<f64>> = (0..d)
            .map(|b| reference_bilinear(&ls.v[b * ls.h * ls.w..(b + 1) * ls.h * ls.w], ls.h, ls.w, lc.h, lc.w))
            .collect();
        let mut angle = vec![0.0; n];
        for p in 0..n {
            let (mut dot, mut nc, mut ns) = (0.0, 0.0, 0.0);
            for b in 0..d {
                let x = lc.v[b * n + p];
                let y = up[b][p];
                dot += x * y;
                nc += x * x;
                ns += y * y;
            }
            angle[p] = if nc == 0.0 || ns == 0.0 {
                0.0
            } else {
                (dot / (nc.sqrt() * ns.sqrt())).clamp(-1.0, 1.0).acos()
            };
        }
        let full = reference_bilinear(&angle, lc.h, lc.w, h, w);
        for (t, v) in total.iter_mut().zip(full) {
            *t += v;
        }
    }
    let lo = total.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = total.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    total
        .iter()
        .map(|&v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

pub fn random_cube(rng: &mut ChaCha8Rng, h: usize, w: usize, d: usize) -> HyperCube {
    let data = (0..h * w * d).map(|_| rng.random_range(0.05f32..1.0)).collect();
    HyperCube::new(h, w, d, data).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
