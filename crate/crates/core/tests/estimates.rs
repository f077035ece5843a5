use std::f64::consts::PI;

use modlab::estimates::*;
use modlab::fields::{Grid, Signature};
use modlab::{Complex, Error};
use proptest::prelude::*;

fn grid(l1: f64, n1: usize) -> Grid<f64> {
    Grid::new(&[l1, 8.0 * PI], &[n1, 64]).unwrap()
}

fn sweep(g: Grid<f64>, k1: &[i64]) -> Sweep {
    Sweep::along_axis(g, Signature::hyperbolic(2), k1, 11)
}

#[test]
fn case_ids_parse_from_names_letters_and_aliases() {
    for id in CaseId::ALL {
        assert_eq!(id.name().parse::<CaseId>().unwrap(), id);
        assert_eq!(id.letter().parse::<CaseId>().unwrap(), id);
    }
    assert_eq!("interaction-3".parse::<CaseId>().unwrap(), CaseId::StrichartzMaximal);
    assert!(matches!("nope".parse::<CaseId>(), Err(Error::Parse(_))));
}

#[test]
fn predicted_exponents() {
    let e = |id| EstimateCase::new(id, 2).exponent();
    assert_eq!(e(CaseId::L1Anisotropic), 0.5);
    assert_eq!(e(CaseId::SmoothEffect), 0.0);
    assert_eq!(e(CaseId::SmoothStrichartz), 0.5);
    assert_eq!(e(CaseId::StrichartzMaximal), 1.5);
    assert_eq!(e(CaseId::SmoothMaximal), 0.75);
    assert_eq!(e(CaseId::L2Anisotropic), 0.25);
    assert_eq!(e(CaseId::MaximalSmoothing), -0.25);
    assert_eq!(e(CaseId::GaborGeneral), 0.5);
}

fn err_text(r: modlab::Result<()>) -> String {
    match r {
        Err(Error::Validation(m)) => m,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn inadmissible_parameters_name_the_condition() {
    let mut c = EstimateCase::new(CaseId::L2Anisotropic, 2);
    c.params.q = 2.0;
    assert!(err_text(c.validate(2)).contains("2 < q < ∞"));
    c.params.q = 4.0;
    c.params.q_bar = 4.0;
    assert!(err_text(c.validate(2)).contains("n(1/2 − 2/q̄) > 2/q"));

    let mut a = EstimateCase::new(CaseId::GaborGlobal, 1);
    a.params.p = 1.0;
    a.params.p_bar = 2.0;
    assert!(err_text(a.validate(1)).contains("n(1/2 − 1/p̄) > 1/p"));

    let mut d = EstimateCase::new(CaseId::Strichartz, 2);
    d.params.p = 1.5;
    assert!(err_text(d.validate(2)).contains("4/n ≤ p"));

    let mut i = EstimateCase::new(CaseId::GaborGeneral, 2);
    i.params.r = 2.0;
    assert!(err_text(i.validate(2)).contains("n(1/r − 1/2 − 1/p̄) > 1/p"));

    let mut e4 = EstimateCase::new(CaseId::SmoothMaximal, 2);
    e4.params.q = 2.0;
    assert!(err_text(e4.validate(2)).contains("2 < q"));
}

#[test]
fn sweep_preconditions() {
    let g = grid(12.0 * PI, 1024);
    let g_case = EstimateCase::new(CaseId::MaximalSmoothing, 2);
    let r = run_estimate(&g_case, &sweep(g.clone(), &[12, 17, 24, 34]));
    assert!(matches!(r, Err(Error::Validation(m)) if m.contains("|k₁| ≥ 20")));

    let c = EstimateCase::new(CaseId::SmoothEffect, 2);
    let mut s = sweep(g.clone(), &[8, 16, 24, 32]);
    s.window = Some(s.max_window() * 1.5);
    assert!(matches!(run_estimate(&c, &s), Err(Error::Validation(m)) if m.contains("L/(4 max|k|)")));

    assert!(run_estimate(&c, &sweep(g.clone(), &[8, 16, 24])).is_err());
    // beyond the band of the grid
    assert!(run_estimate(&c, &sweep(g, &[8, 16, 24, 60])).is_err());
}

#[test]
fn uniform_lp_is_one_at_time_zero() {
    let g = grid(12.0 * PI, 1024);
    let mut s = sweep(g, &[8, 12, 16, 24]);
    s.window = Some(1e-12);
    s.slices = 2;
    for p in [1.0, 2.0, 4.0] {
        let mut c = EstimateCase::new(CaseId::UniformLp, 2);
        c.params.p = p;
        let rep = run_estimate(&c, &s).unwrap();
        for row in &rep.rows {
            assert!((row.ratio - 1.0).abs() < 1e-9, "p = {p}: {row:?}");
        }
    }
}

#[test]
fn strichartz_energy_part_is_the_box_norm() {
    // ‖□_k S(t)u₀‖_{L^∞_t L²} = ‖□_k u₀‖₂ by unitarity, and it dominates the
    // L⁴ part for these unit data over a short window
    let rep = run_estimate(&EstimateCase::new(CaseId::Strichartz, 2), &sweep(grid(12.0 * PI, 1024), &[8, 12, 16, 24]))
        .unwrap();
    for row in &rep.rows {
        assert!((row.ratio - 1.0).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn smoothing_matches_the_kato_identity() {
    // For spectra in ξ₁ > 0, ∫∫ |D^{1/2}_{x₁} S(t)u₀|² dx̄ dt = ‖u₀‖²/2 at every
    // x₁ (change variables τ = |ξ|²_±); the sup over x₁ of the window integral
    // approaches 2^{-1/2} once the packet has passed.
    let g = grid(24.0 * PI, 4096);
    let s = sweep(g, &[25, 30, 35, 50]);
    let rep = run_estimate(&EstimateCase::new(CaseId::SmoothEffect, 2), &s).unwrap();
    let ratios: Vec<f64> = rep
        .rows
        .iter()
        .filter(|r| r.datum == Datum::Bump && [25, 35, 50].contains(&r.k[0]))
        .map(|r| r.ratio)
        .collect();
    assert_eq!(ratios.len(), 3);
    for r in &ratios {
        assert!((r - 0.5f64.sqrt()).abs() < 0.02 * 0.5f64.sqrt(), "{ratios:?}");
    }
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 1.2, "{ratios:?}");
}

#[test]
fn l1_anisotropic_slope_example() {
    let rep = run_estimate(
        &EstimateCase::new(CaseId::L1Anisotropic, 2),
        &sweep(grid(12.0 * PI, 1024), &[8, 16, 24, 32]),
    )
    .unwrap();
    assert!(rep.slope <= SLOPE_TOLERANCE, "slope {}", rep.slope);
    assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
    assert_eq!(rep.rows.len(), 12);
    assert_eq!(rep.per_k().len(), 4);
}

#[test]
fn ratios_survive_lattice_translations() {
    let base = sweep(grid(12.0 * PI, 1024), &[20, 25, 31, 39]);
    let mut moved = base.clone();
    moved.shift = vec![3.0, -2.0];
    for id in [CaseId::L1Anisotropic, CaseId::SmoothEffect, CaseId::L2Anisotropic, CaseId::MaximalSmoothing] {
        let c = EstimateCase::new(id, 2);
        let a = run_estimate(&c, &base).unwrap();
        let b = run_estimate(&c, &moved).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x.ratio - y.ratio).abs() < 0.02 * x.ratio, "{id}: {x:?} vs {y:?}");
        }
    }
}

#[test]
fn refinement_keeps_the_maxima() {
    let s = sweep(grid(12.0 * PI, 1024), &[8, 12, 16, 24]);
    for id in [CaseId::SmoothEffect, CaseId::SmoothMaximal] {
        let chk = refinement_check(&EstimateCase::new(id, 2), &s).unwrap();
        assert_eq!(chk.rows.len(), 4);
        assert!(chk.rel_change < 0.2, "{id}: {chk:?}");
    }
}

#[test]
fn window_saturated_cases_are_window_stable() {
    let s = sweep(grid(12.0 * PI, 1024), &[8, 12, 16, 24]);
    for id in [CaseId::Strichartz, CaseId::UniformLp, CaseId::SmoothEffect] {
        let chk = window_stability(&EstimateCase::new(id, 2), &s).unwrap();
        assert!(chk.rel_change < 0.1, "{id}: {chk:?}");
    }
}

#[test]
fn data_are_grid_independent_samples() {
    // same continuum function on both grids, up to the unit normalization,
    // which is a Riemann sum and differs at the aliasing level; 128 nodes on
    // x₂ so the spectra fit the band
    let g = Grid::new(&[12.0 * PI, 8.0 * PI], &[512, 128]).unwrap();
    let f = g.refined().unwrap();
    for d in Datum::ALL {
        let a = datum(d, &g, &[10, 0], 5, &[1.0, 0.0]).unwrap();
        let b = datum(d, &f, &[10, 0], 5, &[1.0, 0.0]).unwrap();
        let (n1, m1) = (g.samples()[0], g.samples()[1]);
        let coarse: Vec<Complex<f64>> = (0..n1 * m1)
            .map(|flat| b.data()[(2 * (flat / m1)) * (2 * m1) + 2 * (flat % m1)])
            .collect();
        let na: f64 = a.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = coarse.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((na / nb - 1.0).abs() < 1e-5, "{d:?}");
        let worst = a
            .data()
            .iter()
            .zip(&coarse)
            .map(|(x, y)| (x - y * (na / nb)).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "{d:?}: {worst}");
        assert!((a.l2_norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn report_serializes() {
    let rep = run_estimate(&EstimateCase::new(CaseId::SmoothEffect, 2), &sweep(grid(12.0 * PI, 1024), &[8, 12, 16, 24]))
        .unwrap();
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + rep.rows.len());
    assert!(text.starts_with("case,k,datum,lhs,weight,data_norm,ratio"));
    let json = serde_json::to_string(&rep).unwrap();
    let back: EstimateReport = serde_json::from_str(&json).unwrap();
    for (a, b) in back.rows.iter().zip(&rep.rows) {
        assert_eq!((&a.k, a.datum), (&b.k, b.datum));
        assert!((a.ratio - b.ratio).abs() <= 1e-15 * b.ratio);
    }
    assert_eq!(back.case, CaseId::SmoothEffect);
}

#[test]
fn convolution_delta_oracle() {
    // ∫ (1+|x|)^{-4} dx = 2/3
    let c = convolution_lemma_check(&[(0, 1.0)], 2.0, 2.0, 2.0, 0.0, 1.0).unwrap();
    assert!((c.lhs - (2.0f64 / 3.0).sqrt()).abs() < 1e-6, "{c:?}");
    assert!((c.rhs_scale - 2.0f64.sqrt()).abs() < 1e-14);
    assert!(c.ratio.is_finite());
    // ∫ (1+|x|/c)^{-θp} dx = 2c/(θp − 1), here with a shift b
    let c = convolution_lemma_check(&[(2, -3.0)], 1.5, 2.0, 1.0, 0.7, 5.0).unwrap();
    let exact = 3.0 * (2.0f64 * 5.0 / (1.5 * 2.0 - 1.0)).sqrt();
    assert!((c.lhs - exact).abs() < 1e-8 * exact, "{c:?} vs {exact}");
}

#[test]
fn convolution_two_point_oracle() {
    // a = δ₀ + δ₁, θ = 2, p = 1: the L¹ norm is additive, 2 · 2c/(θ − 1)
    let c = convolution_lemma_check(&[(0, 1.0), (1, 1.0)], 2.0, 1.0, 1.0, 0.0, 3.0).unwrap();
    assert!((c.lhs - 12.0).abs() < 1e-9, "{c:?}");
    // p = ∞ peaks at a kink: 1 + (1 + 1/3)^{-2}
    let c = convolution_lemma_check(&[(0, 1.0), (1, 1.0)], 2.0, f64::INFINITY, 1.0, 0.0, 3.0).unwrap();
    assert!((c.lhs - (1.0 + 0.5625)).abs() < 1e-14);
}

#[test]
fn convolution_zero_and_preconditions() {
    let c = convolution_lemma_check(&[(0, 0.0)], 2.0, 2.0, 2.0, 0.0, 1.0).unwrap();
    assert_eq!((c.lhs, c.rhs_scale, c.ratio), (0.0, 0.0, 0.0));
    assert!(convolution_lemma_check(&[(0, 1.0)], 2.0, 2.0, 2.0, 0.0, 0.5).is_err());
    // θ below 1/r′ + 1/p
    assert!(matches!(
        convolution_lemma_check(&[(0, 1.0)], 0.5, 2.0, 2.0, 0.0, 1.0),
        Err(Error::Validation(m)) if m.contains("θ > 1/r′ + 1/p")
    ));
    // strict case with p < r
    assert!(convolution_lemma_check(&[(0, 1.0)], 3.0, 2.0, 4.0, 0.0, 1.0).is_err());
    // equality case needs θ < 1
    assert!(convolution_lemma_check(&[(0, 1.0)], 1.0, 2.0, 2.0, 0.0, 1.0).is_err());
}

#[test]
fn convolution_sweeps_respect_the_scaling() {
    let a: Vec<(i64, f64)> = (-6..=6).map(|l| (l, 1.0 / (1.0 + (l as f64).abs()))).collect();
    let cs = [1.0, 2.0, 4.0, 8.0, 16.0];
    // (θ, p, r), the last one on the equality line θ = 1/r′ + 1/p
    for (theta, p, r) in [(2.0, 2.0, 2.0), (1.5, 4.0, 2.0), (0.75, 4.0, 2.0)] {
        let slope = convolution_sweep(&a, theta, p, r, 0.3, &cs).unwrap();
        let bound = 1.0 / p + (1.0 - 1.0 / r) + 0.1;
        assert!(slope <= bound, "({theta}, {p}, {r}): slope {slope} > {bound}");
        assert!(slope > 0.0);
    }
}

#[test]
fn gauss_legendre_integrates_polynomials() {
    let (x, w) = gauss_legendre(12);
    for deg in 0..24 {
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
        let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
        assert!((got - exact).abs() < 1e-14, "degree {deg}");
    }
}

#[test]
fn slope_fit_recovers_a_power_law() {
    let x: Vec<f64> = (1..6).map(|v| (v as f64).ln()).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.3 - 0.7 * v).collect();
    assert!((fit_slope(&x, &y) + 0.7).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn ratios_are_invariant_under_complex_scaling(
        case in 0usize..12,
        re in -50.0f64..50.0,
        im in -50.0f64..50.0,
        d in 0usize..3,
    ) {
        prop_assume!(re.hypot(im) > 1e-3);
        let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[256, 64]).unwrap();
        let id = CaseId::ALL[case];
        let k1 = if id == CaseId::MaximalSmoothing { 20 } else { 6 };
        let mut s = Sweep::along_axis(g.clone(), Signature::hyperbolic(2), &[k1, k1, k1, k1], 3);
        s.slices = 16;
        let k = [k1, 0];
        let c = EstimateCase::new(id, 2);
        let g = if id == CaseId::MaximalSmoothing { Grid::new(&[8.0 * PI, 8.0 * PI], &[512, 64]).unwrap() } else { g };
        s.grid = g.clone();
        let u = datum(Datum::ALL[d], &g, &k, 9, &[0.0, 0.0]).unwrap();
        let v = u.scale(Complex::new(re, im));
        let a = ratio_for(&c, &s, &k, &u).unwrap();
        let b = ratio_for(&c, &s, &k, &v).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a, "{}: {} vs {}", id, a, b);
    }
}
