use hypersal_core::pseudo_label::{
    binarize_edges, flood_fill_labels, flood_region, from_run_lengths, generate_pseudo_label,
    generate_pseudo_label_with, gradient_edges, merge_edges, run_lengths, EdgeInput, EdgeInputs,
    PseudoLabelConfig,
};
use hypersal_core::{BinaryEdgeMap, EdgeMap, Error, Grid, Label, PointSet, RgbImage, SaliencyMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;

use oracles::flood::*;

#[test]
fn flood_fill_matches_reference_on_random_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut leaks = 0;
    for trial in 0..1000 {
        let t = random_trial(&mut rng);
        let barriers = Grid::new(t.h, t.w, t.blocked.clone()).unwrap();
        let points = PointSet::new((t.h, t.w), t.salient.clone(), t.background).unwrap();
        let got = flood_fill_labels(&barriers, &points).unwrap();
        let (want, leak) = reference_labels(&t.blocked, t.h, t.w, &t.salient, t.background);
        assert_eq!(got.mask.as_slice(), &want[..], "trial {trial}");
        assert_eq!(got.leak, leak, "trial {trial}");
        leaks += leak as usize;

        // leak containment: annotated points keep their label unless their
        // component is shared with the other kind of fill
        let bg_region = relax_region(&t.blocked, t.h, t.w, t.background);
        for &s in &t.salient {
            let label = got.mask.get(s.0, s.1);
            if bg_region[s.0 * t.w + s.1] {
                assert_eq!(label, Label::Unknown);
            } else {
                assert_eq!(label, Label::Foreground);
            }
        }
        let bg_label = got.mask.get(t.background.0, t.background.1);
        assert_eq!(bg_label == Label::Unknown, leak);
        if !leak {
            assert_eq!(bg_label, Label::Background);
        }
        for (i, &b) in t.blocked.iter().enumerate() {
            if b {
                assert_eq!(got.mask.as_slice()[i], Label::Unknown);
            }
        }
    }
    // both outcomes must actually be exercised
    assert!(leaks > 50 && leaks < 950, "{leaks} leaking trials");
}

#[test]
fn raising_tau_never_shrinks_a_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let h = rng.random_range(1..=32);
        let w = rng.random_range(1..=32);
        let edges = EdgeMap::new(h, w, (0..h * w).map(|_| rng.random_range(0.0..1.5)).collect()).unwrap();
        let mut taus = [rng.random_range(0.0..1.6), rng.random_range(0.0..1.6)];
        taus.sort_by(f64::total_cmp);
        let low = binarize_edges(&edges, taus[0]).unwrap();
        let high = binarize_edges(&edges, taus[1]).unwrap();
        let free: Vec<usize> = (0..h * w).filter(|&i| !low.as_slice()[i]).collect();
        if free.is_empty() {
            continue;
        }
        let s = free[rng.random_range(0..free.len())];
        let seed = (s / w, s % w);
        let a = flood_region(&low, seed).unwrap();
        let b = flood_region(&high, seed).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(&x, &y)| !x || y));
    }
}

#[test]
fn ring_examples() {
    let ring = |gap: bool| -> BinaryEdgeMap {
        Grid::from_fn(5, 5, |r, c| {
            let on_ring = (1..=3).contains(&r) && (1..=3).contains(&c) && (r, c) != (2, 2);
            on_ring && !(gap && (r, c) == (1, 2))
        })
        .unwrap()
    };
    let points = PointSet::new((5, 5), vec![(2, 2)], (0, 0)).unwrap();
    let closed = flood_fill_labels(&ring(false), &points).unwrap();
    assert_eq!(closed.counts(), (1, 16, 8));
    assert!(!closed.leak);
    let open = flood_fill_labels(&ring(true), &points).unwrap();
    assert!(open.leak);
    // the shared component is unknown, and so are the remaining ring pixels
    assert_eq!(open.counts(), (0, 0, 25));

    let none = Grid::filled(5, 5, false).unwrap();
    let p = PointSet::new((5, 5), vec![(0, 0)], (4, 4)).unwrap();
    assert_eq!(flood_fill_labels(&none, &p).unwrap().counts(), (0, 0, 25));
}

#[test]
fn seed_on_barrier_and_out_of_bounds() {
    let b = Grid::from_fn(4, 4, |r, _| r == 1).unwrap();
    let p = PointSet::new((4, 4), vec![(1, 2)], (3, 3)).unwrap();
    assert_eq!(flood_fill_labels(&b, &p).unwrap_err().kind(), "point-on-edge");
    assert!(matches!(flood_region(&b, (9, 0)), Err(Error::PointOutOfBounds { .. })));
}

#[test]
fn edge_operations() {
    let a = EdgeMap::new(1, 3, vec![0.3, 0.8, 0.0]).unwrap();
    let b = EdgeMap::new(1, 3, vec![0.4, 0.8, 0.0]).unwrap();
    let m = merge_edges(&a, &b).unwrap();
    assert!((m.as_slice()[0] - 0.7).abs() < 1e-15);
    assert_eq!(m.as_slice()[1], 1.6);
    assert_eq!(merge_edges(&EdgeMap::zeros(1, 3).unwrap(), &b).unwrap(), b);

    let e = EdgeMap::new(1, 3, vec![0.3, 0.5, 0.7]).unwrap();
    assert_eq!(binarize_edges(&e, 0.5).unwrap().as_slice(), &[false, true, true]);
    assert!(binarize_edges(&e, 0.0).unwrap().as_slice().iter().all(|&v| v));
    assert!(binarize_edges(&e, 0.71).unwrap().as_slice().iter().all(|&v| !v));
    assert!(binarize_edges(&e, -0.1).is_err());
}

#[test]
fn sobel_on_a_vertical_step() {
    let step = SaliencyMap::from_fn(6, 8, |_, c| if c >= 4 { 1.0 } else { 0.0 }).unwrap();
    let e = gradient_edges(&step);
    for r in 0..6 {
        for c in 0..8 {
            let v = e.get(r, c);
            match c {
                3 | 4 => assert_eq!(v, 1.0),
                _ => assert_eq!(v, 0.0),
            }
        }
    }
    assert!(gradient_edges(&SaliencyMap::filled(5, 5, 0.3).unwrap()).as_slice().iter().all(|&v| v == 0.0));
    assert_eq!(gradient_edges(&SaliencyMap::filled(1, 1, 0.3).unwrap()).as_slice(), &[0.0]);
}

/// Square of side `side` at `top` in an `n × n` frame, distinct in red.
fn square_scene(n: usize, top: usize, side: usize) -> (RgbImage, Grid<bool>) {
    let inside = Grid::from_fn(n, n, |r, c| (top..top + side).contains(&r) && (top..top + side).contains(&c)).unwrap();
    let plane = |on: f64, off: f64| inside.as_slice().iter().map(|&i| if i { on } else { off }).collect::<Vec<_>>();
    let fc = RgbImage::new(n, n, [plane(0.9, 0.1), plane(0.2, 0.6), plane(0.3, 0.3)]).unwrap();
    (fc, inside)
}

#[test]
fn zero_spectral_map_equals_false_color_alone() {
    let (fc, _) = square_scene(64, 20, 24);
    let zero = SaliencyMap::filled(64, 64, 0.0).unwrap();
    let points = PointSet::new((64, 64), vec![(32, 32)], (3, 3)).unwrap();
    let cfg = PseudoLabelConfig::default();
    let a = generate_pseudo_label(&fc, &zero, &points, &cfg).unwrap();
    let b = generate_pseudo_label_with(
        &fc,
        &zero,
        &points,
        &cfg,
        EdgeInputs {
            falsecolor: EdgeInput::Extract,
            spectral: EdgeInput::Omit,
        },
    )
    .unwrap();
    assert_eq!(a, b);
    assert!(!a.leak);
}

#[test]
fn full_and_half_scale_agree_away_from_the_outline() {
    let (n, top, side) = (64, 20, 24);
    let (fc, inside) = square_scene(n, top, side);
    let zero = SaliencyMap::filled(n, n, 0.0).unwrap();
    let points = PointSet::new((n, n), vec![(32, 32)], (3, 3)).unwrap();
    let half = generate_pseudo_label(&fc, &zero, &points, &PseudoLabelConfig::default()).unwrap();
    let full = generate_pseudo_label(&fc, &zero, &points, &PseudoLabelConfig { scale: 1.0, tau: 0.5 }).unwrap();
    let near_outline = |r: usize, c: usize| {
        let here = inside.get(r, c);
        (r.saturating_sub(2)..=(r + 2).min(n - 1))
            .any(|y| (c.saturating_sub(2)..=(c + 2).min(n - 1)).any(|x| inside.get(y, x) != here))
    };
    for r in 0..n {
        for c in 0..n {
            if !near_outline(r, c) {
                assert_eq!(half.mask.get(r, c), full.mask.get(r, c), "({r}, {c})");
            }
        }
    }
}

#[test]
fn supplied_edges_are_resized_to_the_working_frame() {
    let (fc, _) = square_scene(32, 8, 16);
    let zero = SaliencyMap::filled(32, 32, 0.0).unwrap();
    let points = PointSet::new((32, 32), vec![(16, 16)], (1, 1)).unwrap();
    let full_res = gradient_edges(&fc);
    let r = generate_pseudo_label_with(
        &fc,
        &zero,
        &points,
        &PseudoLabelConfig::default(),
        EdgeInputs {
            falsecolor: EdgeInput::Supplied(&full_res),
            spectral: EdgeInput::Omit,
        },
    )
    .unwrap();
    assert_eq!(r.mask.dims(), (32, 32));
    assert_eq!(r.mask.get(16, 16), Label::Foreground);
    assert_eq!(r.mask.get(1, 1), Label::Background);
}

proptest! {
    #[test]
    fn run_lengths_round_trip(h in 1usize..12, w in 1usize..12, codes in proptest::collection::vec(0u8..3, 144)) {
        let labels = [Label::Background, Label::Unknown, Label::Foreground];
        let mask = Grid::from_fn(h, w, |r, c| labels[codes[r * w + c] as usize]).unwrap();
        let runs = run_lengths(&mask);
        prop_assert_eq!(runs.iter().map(|r| r.1).sum::<usize>(), h * w);
        prop_assert!(runs.windows(2).all(|p| p[0].0 != p[1].0));
        prop_assert_eq!(from_run_lengths(h, w, &runs).unwrap(), mask);
    }
}
