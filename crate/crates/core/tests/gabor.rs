use std::f64::consts::PI;

use modlab::families::{rng, wave_packets};
use modlab::fields::{make_grid, ComplexField, Grid};
use modlab::freqdecomp::{bracket, modulation_norm, NormSpec, Partition};
use modlab::gabor::{
    analyze, coefficient_norm, frame_bounds, frame_operator_apply, gauss_atom, synthesize, FrameCoefficients,
    GaborSystem, Truncation,
};
use modlab::{Complex, Error, C64};
use proptest::prelude::*;
use rand::Rng;

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

fn grid1() -> Grid<f64> {
    make_grid(1, 8.0 * PI, 512).unwrap()
}

const TRUNC: Truncation = Truncation { k_rad: 8, l_rad: 8 };
/// Atom overlaps fall like `e^{−d²/4}`, so data meant to round trip to 1e−10
/// sits ten or more lattice steps inside the truncation.
const WIDE: Truncation = Truncation { k_rad: 16, l_rad: 16 };

/// Random combination of atoms with `|k|, |l| ≤ rad`.
fn interior_field(g: &Grid<f64>, rad: i64, seed: u64) -> ComplexField<f64> {
    let mut r = rng(seed);
    let mut f = ComplexField::zeros(g);
    for _ in 0..6 {
        let k = r.gen_range(-rad..=rad);
        let l = r.gen_range(-rad..=rad);
        f.axpy(c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)), &gauss_atom(&[k], &[l], g).unwrap());
    }
    f
}

#[test]
fn atoms_have_gaussian_shape() {
    let g = grid1();
    let a = gauss_atom::<f64>(&[0], &[0], &g).unwrap();
    let (imax, vmax) = a.data().iter().enumerate().fold((0, 0.0), |(bi, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bi, bv) });
    assert_eq!(g.x(0, imax), 0.0);
    assert!((vmax - 1.0).abs() < 1e-15);
    assert!(a.data().iter().all(|z| z.im == 0.0));
    for (k, l) in [(0i64, 0i64), (3, 2), (-7, -9), (12, 5)] {
        let n = gauss_atom::<f64>(&[k], &[l], &g).unwrap().l2_norm();
        assert!((n - PI.powf(0.25)).abs() < 1e-8);
    }
    let m32 = gauss_atom::<f64>(&[3], &[2], &g).unwrap();
    let m02 = gauss_atom::<f64>(&[0], &[2], &g).unwrap();
    for (x, y) in m32.data().iter().zip(m02.data()) {
        assert!((x.norm() - y.norm()).abs() < 1e-15);
    }
    let g2 = Grid::new(&[8.0 * PI, 8.0 * PI], &[128, 128]).unwrap();
    let n2 = gauss_atom::<f64>(&[2, -1], &[3, 4], &g2).unwrap().l2_norm();
    assert!((n2 - PI.sqrt()).abs() < 1e-8);
    assert!(gauss_atom::<f64>(&[0], &[20], &g).is_err());
}

#[test]
fn synthesis_is_linear() {
    let g = grid1();
    let mut one = FrameCoefficients::zeros(1, TRUNC);
    one.set(&[2], &[-3], c(1.0, 0.0)).unwrap();
    let d = synthesize(&one, &g).unwrap().rel_l2_diff(&gauss_atom(&[2], &[-3], &g).unwrap());
    assert!(d < 1e-13, "{d}");
    assert!(synthesize(&FrameCoefficients::zeros(1, TRUNC), &g).unwrap().is_zero());
    let mut r = rng(4);
    let mut x = FrameCoefficients::zeros(1, TRUNC);
    let mut y = FrameCoefficients::zeros(1, TRUNC);
    for _ in 0..20 {
        x.set(&[r.gen_range(-8..=8)], &[r.gen_range(-8..=8)], c(r.gen(), r.gen())).unwrap();
        y.set(&[r.gen_range(-8..=8)], &[r.gen_range(-8..=8)], c(r.gen(), r.gen())).unwrap();
    }
    let (a, b) = (c(0.5, -2.0), c(-1.0, 0.25));
    let lhs = synthesize(&x.combine(a, &y, b).unwrap(), &g).unwrap();
    let rhs = synthesize(&x, &g).unwrap().scale(a).add(&synthesize(&y, &g).unwrap().scale(b));
    assert!(lhs.rel_l2_diff(&rhs) < 1e-12);
}

/// The patch-based analysis against direct inner products.
#[test]
fn analysis_matches_direct_inner_products() {
    for g in [grid1(), Grid::new(&[8.0 * PI, 6.0 * PI], &[128, 96]).unwrap()] {
        let trunc = Truncation { k_rad: 4, l_rad: 5 };
        let sys = GaborSystem::new(&g, trunc).unwrap();
        let f = wave_packets::<f64>(&g, 3, &vec![-3.0; g.dim()], &vec![3.0; g.dim()], 4.0, 8);
        let coef = sys.analysis(&f).unwrap();
        for (k, l, v) in coef.iter().step_by(7) {
            let direct = f.inner(&gauss_atom(&k, &l, &g).unwrap());
            assert!((v - direct).norm() < 1e-12 * f.l2_norm(), "k={k:?} l={l:?}");
        }
    }
}

#[test]
fn frame_operator_is_self_adjoint_and_bounded() {
    let g = grid1();
    let fb = frame_bounds(&g, TRUNC).unwrap();
    assert!(fb.a > 0.0 && fb.a <= fb.b);
    assert!(fb.b / fb.a < 10.0, "B/A = {}", fb.b / fb.a);
    // the Gaussian unit lattice is nearly tight around 2π·‖g‖² = 2π√π
    assert!((fb.a / (2.0 * PI * PI.sqrt()) - 1.0).abs() < 1e-3 && fb.b / fb.a < 1.001, "{fb:?}");
    let (z, warn) = frame_operator_apply(&ComplexField::<f64>::zeros(&g), TRUNC).unwrap();
    assert!(z.is_zero() && !warn);
    for seed in 0..20 {
        let f = interior_field(&g, 2, seed);
        let (sf, warn) = frame_operator_apply(&f, TRUNC).unwrap();
        assert!(!warn);
        let q = sf.inner(&f);
        assert!(q.im.abs() < 1e-10 * q.re);
        let rq = q.re / f.l2_norm().powi(2);
        assert!(rq >= fb.a * (1.0 - 1e-9) && rq <= fb.b * (1.0 + 1e-9), "{rq} outside [{}, {}]", fb.a, fb.b);
    }
    // mass far outside the translation lattice raises the flag
    let far = gauss_atom::<f64>(&[0], &[17], &g).unwrap();
    assert!(frame_operator_apply(&far, TRUNC).unwrap().1);
}

#[test]
fn frame_bounds_are_stable_under_doubling() {
    let g = grid1();
    let small = frame_bounds(&g, TRUNC).unwrap();
    let big = frame_bounds(&g, Truncation { k_rad: 16, l_rad: 16 }).unwrap();
    assert!((big.a / small.a - 1.0).abs() < 0.05, "{small:?} {big:?}");
    assert!((big.b / small.b - 1.0).abs() < 0.05, "{small:?} {big:?}");
    assert!(matches!(frame_bounds(&g, Truncation { k_rad: 0, l_rad: 0 }), Err(Error::Numerical(_))));
}

#[test]
fn analysis_round_trips() {
    let g = grid1();
    let atom = gauss_atom::<f64>(&[0], &[0], &g).unwrap();
    let back = synthesize(&analyze(&atom, WIDE).unwrap(), &g).unwrap();
    assert!(back.rel_l2_diff(&atom) < 1e-8);
    let two = gauss_atom::<f64>(&[2], &[-1], &g)
        .unwrap()
        .add(&gauss_atom(&[-3], &[4], &g).unwrap().scale(c(0.0, 0.5)));
    let back = synthesize(&analyze(&two, WIDE).unwrap(), &g).unwrap();
    assert!(back.rel_l2_diff(&two) < 1e-8);
    let zero = analyze(&ComplexField::<f64>::zeros(&g), WIDE).unwrap();
    assert!(zero.values().iter().all(|z| *z == c(0.0, 0.0)));
    for seed in 0..5 {
        let f = wave_packets::<f64>(&g, 3, &[-4.0], &[4.0], 4.0, 100 + seed);
        let back = synthesize(&analyze(&f, WIDE).unwrap(), &g).unwrap();
        assert!(back.rel_l2_diff(&f) < 1e-8);
    }
}

#[test]
fn analysis_round_trips_in_two_dimensions() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[256, 256]).unwrap();
    let trunc = Truncation { k_rad: 13, l_rad: 14 };
    let f = wave_packets::<f64>(&g, 3, &[-1.5, -1.5], &[1.5, 1.5], 2.0, 12);
    let back = synthesize(&analyze(&f, trunc).unwrap(), &g).unwrap();
    assert!(back.rel_l2_diff(&f) < 1e-8);
}

#[test]
fn gabor_needs_a_pi_multiple_box() {
    let g = make_grid(1, 25.0, 512).unwrap();
    assert!(GaborSystem::new(&g, TRUNC).is_err());
}

#[test]
fn coefficient_norm_values() {
    let mut one = FrameCoefficients::<f64>::zeros(2, Truncation { k_rad: 5, l_rad: 5 });
    one.set(&[3, -4], &[1, 1], c(1.0, 0.0)).unwrap();
    for s in [0.0, 0.5, 2.0] {
        let n = coefficient_norm(&one, &NormSpec::new(s, 2.0, 1.0).unwrap()).unwrap();
        assert!((n - bracket(&[3, -4]).powf(s)).abs() < 1e-14);
    }
    let zero = FrameCoefficients::<f64>::zeros(1, TRUNC);
    assert_eq!(coefficient_norm(&zero, &NormSpec::new(1.0, 1.0, 1.0).unwrap()).unwrap(), 0.0);
}

#[test]
fn coefficient_norm_is_equivalent_to_modulation_norm() {
    let g = grid1();
    let p = Partition::new();
    let spec = NormSpec::new(0.5, 2.0, 1.0).unwrap();
    let mut ratios = vec![];
    for seed in 0..20 {
        let f = wave_packets::<f64>(&g, 1 + (seed as usize % 4), &[-4.0], &[4.0], 4.0, 200 + seed);
        let a = coefficient_norm(&analyze(&f, WIDE).unwrap(), &spec).unwrap();
        let b = modulation_norm(&f, &spec, &p).unwrap();
        ratios.push(a / b);
    }
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(lo > 0.0 && hi / lo < 4.0, "ratios in [{lo}, {hi}]");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn interior_data_round_trip(seed in 0u64..100_000) {
        let g = grid1();
        let f = interior_field(&g, 5, seed);
        let back = synthesize(&analyze(&f, WIDE).unwrap(), &g).unwrap();
        prop_assert!(back.rel_l2_diff(&f) < 1e-8);
    }
}
