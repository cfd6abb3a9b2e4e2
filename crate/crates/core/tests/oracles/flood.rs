use hypersal_core::Label;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Reachability by repeated relaxation until nothing changes.
pub fn relax_region(blocked: &[bool], h: usize, w: usize, seed: (usize, usize)) -> Vec<bool> {
    let mut on = vec![false; h * w];
    on[seed.0 * w + seed.1] = true;
    loop {
        let mut changed = false;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if on[i] || blocked[i] {
                    continue;
                }
                let near = (r > 0 && on[i - w]) || (r + 1 < h && on[i + w]) || (c > 0 && on[i - 1]) || (c + 1 < w && on[i + 1]);
                if near {
                    on[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return on;
        }
    }
}

pub fn reference_labels(blocked: &[bool], h: usize, w: usize, salient: &[(usize, usize)], bg: (usize, usize)) -> (Vec<Label>, bool) {
    let mut fg = vec![false; h * w];
    for &s in salient {
        for (f, r) in fg.iter_mut().zip(relax_region(blocked, h, w, s)) {
            *f |= r;
        }
    }
    let b = relax_region(blocked, h, w, bg);
    let leak = fg.iter().zip(&b).any(|(&x, &y)| x && y);
    let labels = fg
        .iter()
        .zip(&b)
        .map(|(&f, &g)| match (f, g) {
            (true, false) => Label::Foreground,
            (false, true) => Label::Background,
            _ => Label::Unknown,
        })
        .collect();
    (labels, leak)
}

pub struct Trial {
    pub h: usize,
    pub w: usize,
    pub blocked: Vec<bool>,
    pub salient: Vec<(usize, usize)>,
    pub background: (usize, usize),
}

pub fn random_trial(rng: &mut ChaCha8Rng) -> Trial {
    loop {
        let h = rng.random_range(1..=32);
        let w = rng.random_range(1..=32);
        let density = rng.random_range(0.0..0.7);
        let blocked: Vec<bool> = (0..h * w).map(|_| rng.random_bool(density)).collect();
        let free: Vec<(usize, usize)> = (0..h * w).filter(|&i| !blocked[i]).map(|i| (i / w, i % w)).collect();
        if free.len() < 2 {
            continue;
        }
        let background = free[rng.random_range(0..free.len())];
        let count = rng.random_range(1..=3);
        let mut salient = Vec::new();
        for _ in 0..count {
            let p = free[rng.random_range(0..free.len())];
            if p != background && !salient.contains(&p) {
                salient.push(p);
            }
        }
        if salient.is_empty() {
            continue;
        }
        return Trial {
            h,
            w,
            blocked,
            salient,
            background,
        };
    }
}
