use std::f64::consts::PI;

use modlab::families::{band_limited, normalize, wave_packets};
use modlab::fields::{make_grid, ComplexField, Grid, Signature};
use modlab::freqdecomp::Partition;
use modlab::propagator::propagate_spectral;
use modlab::seminorms::SeminormId;
use modlab::solver::{
    evolve, evolve_to, first_picard_distance, free_evolution, nonlinearity_eval, picard_iterate, strang_step,
    NonlinearityKind, SolverParams,
};
use modlab::{Complex, Error, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

fn params(eps: Signature, kind: NonlinearityKind, dt: f64, t_end: f64) -> SolverParams<f64> {
    let n = eps.dim();
    SolverParams {
        kind,
        lambda: (0..n).map(|j| if j == 0 { c(1.0, 0.0) } else { c(0.0, -0.5) }).collect(),
        kappa: 1,
        mu: c(1.0, 0.0),
        nu: 1,
        dt,
        t_end,
        padding: 2.0,
        snapshots: 5,
        signature: eps,
    }
}

/// Closed-form packet `a e^{−|x−y|²/(2w²)} e^{iω·x}`.
#[derive(Clone)]
struct Packet {
    a: C64,
    y: Vec<f64>,
    w: f64,
    omega: Vec<f64>,
}

impl Packet {
    fn at(&self, x: &[f64]) -> C64 {
        let d2: f64 = x.iter().zip(&self.y).map(|(a, b)| (a - b).powi(2)).sum();
        let ph: f64 = x.iter().zip(&self.omega).map(|(a, b)| a * b).sum();
        self.a * Complex::from_polar((-d2 / (2.0 * self.w * self.w)).exp(), ph)
    }
    fn field(&self, g: &Grid<f64>) -> ComplexField<f64> {
        ComplexField::from_fn(g, |x| self.at(x))
    }
}

/// Fourth-order centred difference of `f` along `axis` at `x`.
fn fd(f: &dyn Fn(&[f64]) -> C64, x: &[f64], axis: usize, h: f64) -> C64 {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[axis] += s * h;
        f(&y)
    };
    (at(-2.0) - at(-1.0) * 8.0 + at(1.0) * 8.0 - at(2.0)) / (12.0 * h)
}

fn packet2() -> Packet {
    Packet {
        a: c(0.6, -0.3),
        y: vec![0.5, -1.0],
        w: 1.3,
        omega: vec![2.0, -1.0],
    }
}

#[test]
fn zero_is_a_fixed_point_of_every_nonlinearity() {
    let g = make_grid(2, 4.0 * PI, 32).unwrap();
    let z = ComplexField::<f64>::zeros(&g);
    for kind in [NonlinearityKind::Power, NonlinearityKind::PowerDerivative, NonlinearityKind::SchrodingerMap] {
        let p = params(Signature::hyperbolic(2), kind, 0.01, 0.1);
        assert!(nonlinearity_eval(&z, &p).unwrap().is_zero());
        assert!(strang_step(&z, &p).unwrap().is_zero());
    }
}

#[test]
fn power_of_a_constant() {
    let g = make_grid(1, 4.0 * PI, 32).unwrap();
    let z = c(0.3, -0.7);
    let u = ComplexField::from_fn(&g, |_| z);
    let mut p = params(Signature::elliptic(1), NonlinearityKind::Power, 0.01, 0.1);
    p.mu = c(-1.5, 0.25);
    for nu in [1, 2, 3] {
        p.nu = nu;
        p.padding = nu as f64 + 1.0;
        let f = nonlinearity_eval(&u, &p).unwrap();
        let want = p.mu * z.norm_sqr().powi(nu as i32) * z;
        for v in f.data() {
            assert!((v - want).norm() < 1e-14);
        }
    }
}

#[test]
fn derivative_power_matches_finite_differences() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[256, 256]).unwrap();
    let pk = packet2();
    let u = pk.field(&g);
    for kappa in [1u32, 2] {
        let mut p = params(Signature::hyperbolic(2), NonlinearityKind::PowerDerivative, 0.01, 0.1);
        p.kappa = kappa;
        p.padding = kappa as f64 + 1.0;
        let f = nonlinearity_eval(&u, &p).unwrap();
        let w = |x: &[f64]| {
            let z = pk.at(x);
            z * z.norm_sqr().powi(kappa as i32)
        };
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for (flat, v) in f.data().iter().enumerate().step_by(37) {
            let idx = g.unravel(flat);
            let x = [g.x(0, idx[0]), g.x(1, idx[1])];
            let want = p.lambda[0] * fd(&w, &x, 0, 1e-3) + p.lambda[1] * fd(&w, &x, 1, 1e-3);
            err = err.max((v - want).norm());
            scale = scale.max(want.norm());
        }
        assert!(err < 1e-6 * scale, "κ={kappa}: {err} vs {scale}");
    }
}

#[test]
fn schrodinger_map_nonlinearity_matches_finite_differences() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[256, 256]).unwrap();
    let pk = packet2();
    let u = pk.field(&g);
    let eps = Signature::hyperbolic(2);
    let p = params(eps.clone(), NonlinearityKind::SchrodingerMap, 0.01, 0.1);
    let f = nonlinearity_eval(&u, &p).unwrap();
    let uf = |x: &[f64]| pk.at(x);
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (flat, v) in f.data().iter().enumerate().step_by(41) {
        let idx = g.unravel(flat);
        let x = [g.x(0, idx[0]), g.x(1, idx[1])];
        let z = pk.at(&x);
        let (d1, d2) = (fd(&uf, &x, 0, 1e-3), fd(&uf, &x, 1, 1e-3));
        let want = z.conj() * 2.0 / (1.0 + z.norm_sqr()) * (d1 * d1 * eps.get::<f64>(0) + d2 * d2 * eps.get::<f64>(1));
        err = err.max((v - want).norm());
        scale = scale.max(want.norm());
    }
    // the rational factor is not band-limited; its aliasing is far below 1e−6
    assert!(err < 1e-6 * scale, "{err} vs {scale}");
}

#[test]
fn inadmissible_parameters_are_rejected() {
    let g = make_grid(1, 4.0 * PI, 32).unwrap();
    let u = band_limited::<f64>(&g, 2.0, 1);
    let base = params(Signature::elliptic(1), NonlinearityKind::PowerDerivative, 0.01, 0.1);
    let mut p = base.clone();
    p.padding = 1.5;
    assert!(matches!(nonlinearity_eval(&u, &p), Err(Error::Validation(_))));
    let mut p = base.clone();
    p.t_end = 0.105;
    assert!(strang_step(&u, &p).is_err());
    let mut p = base.clone();
    p.kappa = 0;
    assert!(strang_step(&u, &p).is_err());
    let mut p = base;
    p.signature = Signature::elliptic(2);
    assert!(strang_step(&u, &p).is_err());
}

#[test]
fn linear_step_is_the_free_flow() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[64, 64]).unwrap();
    let u = band_limited::<f64>(&g, 5.0, 3);
    for eps in [Signature::elliptic(2), Signature::hyperbolic(2)] {
        let p = SolverParams::linear(eps.clone(), 0.05, 1.0);
        let a = strang_step(&u, &p).unwrap();
        assert!(a.rel_l2_diff(&propagate_spectral(&u, 0.05, &eps).unwrap()) < 1e-12);
        let mut p = params(eps.clone(), NonlinearityKind::PowerDerivative, 0.05, 1.0);
        p.lambda = vec![c(0.0, 0.0); 2];
        let b = strang_step(&u, &p).unwrap();
        assert!(b.rel_l2_diff(&propagate_spectral(&u, 0.05, &eps).unwrap()) < 1e-12);
    }
}

#[test]
fn linear_limit_holds_along_the_trajectory() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[64, 64]).unwrap();
    let u0 = band_limited::<f64>(&g, 5.0, 8);
    let eps = Signature::hyperbolic(2);
    let mut p = SolverParams::linear(eps.clone(), 0.01, 0.4);
    p.snapshots = 9;
    let (u, _) = evolve(&u0, &p, &[SeminormId::Gstr], &Partition::new()).unwrap();
    assert_eq!(u.len(), 9);
    for j in 0..u.len() {
        let want = propagate_spectral(&u0, u.time(j), &eps).unwrap();
        assert!(u.slice(j).rel_l2_diff(&want) < 1e-10, "slice {j}");
    }
}

#[test]
fn real_power_conserves_mass() {
    let g = make_grid(1, 8.0 * PI, 128).unwrap();
    let u0 = band_limited::<f64>(&g, 3.0, 5).scale(c(0.1, 0.0));
    for eps in [Signature::elliptic(1), Signature::new(&[-1]).unwrap()] {
        let mut p = params(eps, NonlinearityKind::Power, 1e-3, 1.0);
        p.mu = c(-2.0, 0.0);
        let u = evolve_to(&u0, &p).unwrap();
        let drift = (u.l2_norm() / u0.l2_norm() - 1.0).abs();
        assert!(drift < 1e-6, "drift {drift}");
    }
}

#[test]
fn splitting_converges_at_second_order() {
    let g = make_grid(1, 8.0 * PI, 128).unwrap();
    let u0 = wave_packets::<f64>(&g, 2, &[-1.0], &[1.0], 3.0, 4).scale(c(0.8, 0.0));
    let run = |dt: f64| {
        let p = params(Signature::elliptic(1), NonlinearityKind::PowerDerivative, dt, 0.5);
        evolve_to(&u0, &p).unwrap()
    };
    let dt = 0.02;
    let reference = run(dt / 8.0);
    let e1 = run(dt).sub(&reference).l2_norm();
    let e2 = run(dt / 2.0).sub(&reference).l2_norm();
    // with a Δt/8 reference the ideal ratio is (1 − 1/64)/(1/4 − 1/64) ≈ 4.2
    let ratio = e1 / e2;
    assert!((ratio / 4.0 - 1.0).abs() < 0.3, "ratio {ratio}");
    assert!(e1 > 0.0);
}

#[test]
fn zero_data_evolves_to_zero() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[64, 64]).unwrap();
    let p = params(Signature::hyperbolic(2), NonlinearityKind::PowerDerivative, 0.01, 0.04);
    let (u, trace) = evolve(&ComplexField::zeros(&g), &p, &[SeminormId::Str2, SeminormId::Gstr], &Partition::new()).unwrap();
    assert!(u.slices().iter().all(|s| s.is_zero()));
    assert!(trace.values.iter().flatten().all(|v| *v == 0.0));
    // the stride has to divide the step count
    let mut q = p.clone();
    q.snapshots = 3;
    q.t_end = 0.05;
    assert!(evolve(&ComplexField::zeros(&g), &q, &[SeminormId::Gstr], &Partition::new()).is_err());
}

#[test]
fn large_amplitude_is_reported_as_blow_up() {
    let g = make_grid(1, 4.0 * PI, 64).unwrap();
    let u0 = band_limited::<f64>(&g, 2.0, 1).scale(c(1e7, 0.0));
    let p = params(Signature::elliptic(1), NonlinearityKind::Power, 0.01, 0.1);
    match evolve_to(&u0, &p) {
        Err(Error::BlowUp { max_amplitude, .. }) => assert!(max_amplitude > 1e6),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

fn small_data(g: &Grid<f64>, size: f64, seed: u64) -> ComplexField<f64> {
    normalize(wave_packets::<f64>(g, 3, &[-3.0, -3.0], &[3.0, 3.0], 3.0, seed)).scale(c(size, 0.0))
}

#[test]
fn picard_iterates_contract_for_small_data() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[64, 64]).unwrap();
    let eps = Signature::hyperbolic(2);
    let mut p = params(eps, NonlinearityKind::PowerDerivative, 0.01, 0.5);
    p.lambda = vec![c(1.0, 0.0), c(1.0, 0.0)];
    let ids = SeminormId::solution_space(2, 2);
    let part = Partition::new();
    let u0 = small_data(&g, 1e-2, 21);
    let tr = picard_iterate(&u0, &p, 5, 0.5, 33, &ids, &part).unwrap();
    assert_eq!(tr.distances.len(), 5);
    assert!(tr.diverged_at.is_none());
    assert!(tr.ratios[1] < 0.5, "{tr:?}");
    assert!(tr.distances.iter().all(|d| *d >= 0.0));
    // iterate 1 against an independent Duhamel evaluation
    let d1 = first_picard_distance(&u0, &p, 0.5, 33, &ids, &part).unwrap();
    assert!((tr.distances[0] / d1 - 1.0).abs() < 1e-12, "{} vs {d1}", tr.distances[0]);
    let zero = picard_iterate(&ComplexField::zeros(&g), &p, 3, 0.5, 33, &ids, &part).unwrap();
    assert!(zero.distances.iter().all(|d| *d == 0.0));
    assert!(picard_iterate(&u0, &p, 2, 0.5, 33, &ids, &part).is_err());
}

#[test]
fn small_data_semi_norms_stay_near_the_free_flow() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[64, 64]).unwrap();
    let eps = Signature::hyperbolic(2);
    let mut p = params(eps.clone(), NonlinearityKind::PowerDerivative, 0.01, 2.0);
    p.lambda = vec![c(1.0, 0.0), c(1.0, 0.0)];
    p.snapshots = 41;
    let ids = SeminormId::solution_space(2, 2);
    let part = Partition::new();
    let u0 = small_data(&g, 1e-2, 5);
    let (_, trace) = evolve(&u0, &p, &ids, &part).unwrap();
    let free = free_evolution(&u0, &eps, 2.0, 41).unwrap();
    let lin = modlab::seminorms::seminorm_trace(&free, &ids, &part).unwrap();
    for (a, b) in trace.last().iter().zip(lin.last()) {
        assert!(*a <= 10.0 * *b + 1e-300, "{a} vs free {b}");
        assert!(a.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn power_flow_is_gauge_covariant(theta in 0.0f64..(2.0 * PI), seed in 0u64..1000) {
        let g = make_grid(1, 8.0 * PI, 64).unwrap();
        let u0 = band_limited::<f64>(&g, 3.0, seed).scale(c(0.5, 0.0));
        let mut p = params(Signature::elliptic(1), NonlinearityKind::Power, 0.01, 0.2);
        p.mu = c(1.0, 0.3);
        let rot = Complex::from_polar(1.0, theta);
        let a = evolve_to(&u0.scale(rot), &p).unwrap();
        let b = evolve_to(&u0, &p).unwrap().scale(rot);
        prop_assert!(a.rel_l2_diff(&b) < 1e-10);
    }
}
