use std::f64::consts::LN_2;
use std::sync::Arc;

use gauss_renyi::discretization::{build_matrix, density, CollocationGrid};
use gauss_renyi::dynamics::{histogram, l1_distance, simulate, CoinParams, DEFAULT_BURN_IN};
use gauss_renyi::hardy_kernels::{kernel_j, kj_bilinear, ExpPoly, HalfLineRule};
use gauss_renyi::markov_mod::{apply_a, apply_b, b2_bound, resolvent_j, SplitKind};
use gauss_renyi::spectral_bounds::{ess_radius_bound, v_sum, zeta};
use gauss_renyi::transfer::{apply_lg, apply_lp, apply_lr, Callable, TailPolicy, UnitFunction};
use proptest::prelude::*;

fn trial(a: f64, b: f64, c: f64) -> impl Fn(f64) -> f64 + Sync {
    move |t: f64| a + b * t + c * (2.0 * t).cos()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_is_linear(p in 0.0..=1.0f64, x in 0.0..=1.0f64, alpha in -3.0..3.0f64, beta in -3.0..3.0f64,
                    a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        let pol = TailPolicy::default();
        let f = Callable(trial(a, b, c));
        let g = Callable(|t: f64| (t + 0.5).ln());
        let combo = Callable(|t: f64| alpha * f.eval(t) + beta * g.eval(t));
        let lhs = apply_lp(p, &combo, x, &pol).unwrap();
        let rhs = alpha * apply_lp(p, &f, x, &pol).unwrap() + beta * apply_lp(p, &g, x, &pol).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn lp_is_positive(p in 0.0..=1.0f64, x in 0.0..=1.0f64, shift in 0.0..2.0f64, k in 1.0..6.0f64) {
        let f = Callable(move |t: f64| (k * t - shift).powi(2));
        prop_assert!(apply_lp(p, &f, x, &TailPolicy::default()).unwrap() >= -1e-10);
    }

    #[test]
    fn lp_is_mixture(p in 0.0..=1.0f64, x in 0.0..=1.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        let pol = TailPolicy::default();
        let f = Callable(trial(a, b, c));
        let mix = p * apply_lg(&f, x, &pol).unwrap() + (1.0 - p) * apply_lr(&f, x, &pol).unwrap();
        prop_assert!((apply_lp(p, &f, x, &pol).unwrap() - mix).abs() <= 1e-13);
    }

    #[test]
    fn splits_add_up(p in 0.01..=1.0f64, x in 0.0..=1.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        let pol = TailPolicy::default();
        let f = Callable(trial(a, b, c));
        let lp = apply_lp(p, &f, x, &pol).unwrap();
        for split in [SplitKind::Banach, SplitKind::Hardy] {
            let sum = apply_a(split, p, &f, x, &pol).unwrap() + apply_b(split, p, &f, x);
            prop_assert!((sum - lp).abs() <= 1e-12);
        }
    }

    #[test]
    fn ess_bound_symmetric(p in 0.001..0.999f64, k in 1u32..8) {
        let a = ess_radius_bound(p, k).unwrap().bound;
        let b = ess_radius_bound(1.0 - p, k).unwrap().bound;
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn v_sums_bracket(p in 0.01..0.99f64, t in 2u32..12, n in 10u64..2000) {
        let v = v_sum(t, p, n).unwrap();
        let target = zeta(f64::from(t), 1e-15).unwrap() - p.min(1.0 - p);
        prop_assert!(v.partial <= target + 1e-9);
        prop_assert!(target <= v.partial + v.tail_bound + 1e-9);
    }

    #[test]
    fn kernel_j_partial_sums_bracket(u in 0.0..=1.0f64) {
        let limit = kernel_j(u).unwrap();
        let mut term = 1.0;
        let mut partial = 1.0;
        for k in 1..15 {
            let prev = partial;
            let kf = f64::from(k);
            term *= -u / (kf * (kf + 1.0));
            partial += term;
            prop_assert!(prev.min(partial) - 1e-16 <= limit && limit <= prev.max(partial) + 1e-16);
        }
    }
}

#[test]
fn renyi_telescoping_fixed_point() {
    let pol = TailPolicy::default();
    let f = Callable(|t: f64| 1.0 / t);
    for i in 0..=40 {
        let x = 0.05 + 0.95 * f64::from(i) / 40.0;
        assert!((apply_lr(&f, x, &pol).unwrap() - 1.0 / x).abs() <= 1e-9, "x = {x}");
    }
}

#[test]
fn gauss_fixed_point() {
    let pol = TailPolicy::default();
    let h0 = Callable(|t: f64| 1.0 / ((1.0 + t) * LN_2));
    for i in 0..=20 {
        let x = f64::from(i) / 20.0;
        assert!((apply_lg(&h0, x, &pol).unwrap() - h0.eval(x)).abs() <= 1e-10);
    }
}

#[test]
fn discrete_markov_identity() {
    let pol = TailPolicy::default();
    for d in [16, 24, 32] {
        let grid = Arc::new(CollocationGrid::new(d).unwrap());
        for p in [0.05, 0.3, 0.5, 0.8, 1.0] {
            let m = build_matrix(p, grid.clone(), &pol).unwrap();
            assert!(m.markov_defect().unwrap() <= 1e-9, "d = {d}, p = {p}");
        }
    }
}

#[test]
fn spectral_accuracy_per_doubling() {
    let pol = TailPolicy::default();
    let grid: Vec<f64> = (0..=400).map(|i| f64::from(i) / 400.0).collect();
    for p in [0.3, 0.7] {
        let h: Vec<_> = [8, 16, 32, 64].iter().map(|&d| density(p, d, &pol).unwrap()).collect();
        let err: Vec<f64> = h
            .windows(2)
            .map(|w| grid.iter().map(|&x| (w[0].eval(x) - w[1].eval(x)).abs()).fold(0.0, f64::max))
            .collect();
        assert!(err[1] < 0.5 * err[0] && err[2] < 0.5 * err[1], "p = {p}: {err:?}");
    }
}

#[test]
fn leading_eigenvalue_and_sign() {
    let pol = TailPolicy::default();
    for i in 0..=9 {
        let p = 0.05 + 0.1 * f64::from(i);
        let r = density(p, 32, &pol).unwrap();
        assert!((r.lambda1 - 1.0).abs() <= 1e-8);
        assert!(r.density.values().iter().all(|&v| v > 0.0));
    }
}

#[test]
fn b2_identity_over_p() {
    for i in 1..=99 {
        let p = f64::from(i) / 100.0;
        assert!((b2_bound(p).unwrap() - (1.0 - 0.75 * p)).abs() <= 1e-14);
    }
}

#[test]
fn resolvent_both_sides() {
    let pol = TailPolicy::default();
    let grid = Arc::new(CollocationGrid::new(24).unwrap());
    for split in [SplitKind::Banach, SplitKind::Hardy] {
        for p in [0.1, 0.5, 0.9] {
            let r = resolvent_j(split, p, grid.clone(), &pol).unwrap();
            let n = grid.len();
            let i_minus_b = nalgebra::DMatrix::<f64>::identity(n, n) - &r.b.matrix;
            let left = &r.j.matrix * &i_minus_b;
            let right = &i_minus_b * &r.j.matrix;
            let id = nalgebra::DMatrix::<f64>::identity(n, n);
            assert!((left - &id).amax() <= 1e-10 && (right - &id).amax() <= 1e-10);
        }
    }
}

#[test]
fn kernel_symmetry_battery() {
    let rule = HalfLineRule::default();
    let battery = [
        ExpPoly::one(),
        ExpPoly::exp(0.5),
        ExpPoly { coeffs: vec![0.0, 1.0], rate: 1.0 },
        ExpPoly { coeffs: vec![1.0, 0.5, -0.25], rate: 0.75 },
        ExpPoly { coeffs: vec![0.0, 0.0, 1.0], rate: 1.5 },
    ];
    for (i, f) in battery.iter().enumerate() {
        for g in &battery[i..] {
            let (a, b) = kj_bilinear(f, g, &rule).unwrap();
            assert!((a - b).abs() <= 1e-8);
        }
    }
}

#[test]
fn histogram_approaches_density() {
    let h = density(0.5, 32, &TailPolicy::default()).unwrap();
    let params = CoinParams::new(0.5, 11).unwrap();
    let dist: Vec<f64> = [10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| l1_distance(&histogram(&simulate(&params, 0.3, DEFAULT_BURN_IN, n).unwrap(), 50), &h.density))
        .collect();
    assert!(dist[0] > dist[1] && dist[1] > dist[2], "{dist:?}");
}
