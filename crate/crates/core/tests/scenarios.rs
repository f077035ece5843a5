use std::f64::consts::PI;

use modlab::fields::{make_grid, ComplexField, Grid, Signature};
use modlab::freqdecomp::{modulation_norm, NormSpec, Partition};
use modlab::scenarios::*;
use modlab::{Complex, Error, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[test]
fn sphere_solution_stays_on_the_sphere() {
    let g = Grid::new(&[4.0 * PI, 4.0 * PI], &[64, 64]).unwrap();
    for t in [-3.0, 0.0, 0.4, 10.0] {
        let s = blowup_sphere(t, &g).unwrap();
        assert!(s.unit_defect() < 1e-14);
    }
    let bad = ComplexField::from_fn(&g, |_| c(0.5, 0.0));
    let zero = ComplexField::zeros(&g);
    assert!(matches!(SphereField::new(bad.clone(), zero.clone(), zero.clone()), Err(Error::Validation(_))));
    let complex = ComplexField::from_fn(&g, |_| c(1.0, 1e-3));
    assert!(SphereField::new(complex, zero.clone(), zero).is_err());
}

#[test]
fn schrodinger_map_residual_is_second_order() {
    let patch = Patch::new([0.0, 0.0], 2.0, 0.1).unwrap();
    for t in [-1.0, 0.0, 0.7, 3.0] {
        let r = schmap_residual(t, &patch, 1e-3).unwrap();
        assert!(r.residual < 1e-4, "t={t}: {r:?}");
        // the printed closed forms of □s₂, □s₃ agree with the stencil
        assert!(r.box_s2_discrepancy < 1e-5 && r.box_s3_discrepancy < 1e-5, "{r:?}");
        assert_eq!(r.box_s1, 0.0);
    }
    let coarse = schmap_residual(0.7, &patch, 1e-2).unwrap().residual;
    let fine = schmap_residual(0.7, &patch, 5e-3).unwrap().residual;
    assert!((coarse / fine / 4.0 - 1.0).abs() < 0.1, "{coarse} / {fine}");
}

#[test]
fn printed_box_forms_match_a_hand_derivation() {
    // θ = (x₁² − x₂²)/(4b): θ₁ = x₁/(2b), θ₂ = −x₂/(2b), □θ = 1/b, θ₁² − θ₂² = (x₁² − x₂²)/(4b²)
    for &(t, x1, x2) in &[(0.3, 1.1, -0.4), (-2.0, 0.2, 2.5), (0.0, 1.7, 1.7)] {
        let b = (1.0f64 + t * t).sqrt();
        let th = (x1 * x1 - x2 * x2) / (4.0 * b);
        let grad2 = (x1 * x1 - x2 * x2) / (4.0 * b * b);
        let want = [
            (th.cos() / b - th.sin() * grad2) / b,
            (-th.sin() / b - th.cos() * grad2) / b,
        ];
        let got = printed_box_s(t, [x1, x2]);
        assert!((got[0] - want[0]).abs() < 1e-14 && (got[1] - want[1]).abs() < 1e-14);
    }
}

#[test]
fn blowup_solution_solves_its_equation() {
    let patch = Patch::new([0.3, -0.2], 2.0, 0.1).unwrap();
    for (t, tb) in [(0.0, 1.0), (0.5, 1.0), (0.2, 0.0)] {
        let (r, used) = blowup_residual(t, tb, &patch, 1e-3, BLOWUP_BOX_SIGN).unwrap();
        assert!(used > 1000);
        assert!(r < 1e-5, "t={t}: {r}");
        let (r2, _) = blowup_residual(t, tb, &patch, 5e-4, BLOWUP_BOX_SIGN).unwrap();
        assert!((r / r2 / 4.0 - 1.0).abs() < 0.1);
        // the opposite sign of □ is not satisfied
        let (wrong, _) = blowup_residual(t, tb, &patch, 1e-3, -BLOWUP_BOX_SIGN).unwrap();
        assert!(wrong > 0.1, "{wrong}");
    }
}

#[test]
fn blowup_amplitude_on_the_singular_curve() {
    // on x₁² − x₂² = 4π, θ = π/⟨τ⟩, so |u| has a closed form and |τ||u| → 2
    for tau in [0.1f64, 0.03, 0.01] {
        let b = (1.0 + tau * tau).sqrt();
        let th = PI / b;
        let exact = c(tau, th.sin()).norm() / (b + th.cos());
        let got = blowup_curve_max(1.0 - tau, 1.0, 3.0, 41);
        assert!((got / exact - 1.0).abs() < 1e-6, "{got} vs {exact}");
    }
    let near = blowup_curve_max(0.999, 1.0, 3.0, 41) * 1e-3;
    assert!((near / 2.0 - 1.0).abs() < 1e-3, "{near}");
    assert!(blowup_curve_max(0.9, 1.0, 3.0, 41) < blowup_curve_max(0.99, 1.0, 3.0, 41));
}

#[test]
fn blowup_field_flags_the_singular_set() {
    let g = Grid::new(&[4.0 * PI, 4.0 * PI], &[128, 128]).unwrap();
    let early = blowup_u(-1.0, 0.0, &g, 1e-2).unwrap();
    assert!(early.near_singular.is_empty() && early.suppressed.is_empty());
    assert!(early.min_denominator >= 2f64.sqrt() - 1.0 - 1e-12);
    let late = blowup_u(-0.01, 0.0, &g, 1e-2).unwrap();
    assert!(!late.near_singular.is_empty());
    assert!(late.max_abs > 10.0 * early.max_abs);
    assert!(late.min_denominator < 1e-2);
    for &i in &late.near_singular {
        let idx = g.unravel(i);
        let (x1, x2) = (g.x(0, idx[0]), g.x(1, idx[1]));
        // close to one of the curves x₁² − x₂² = 4π(2j + 1)
        let phase = (x1 * x1 - x2 * x2) / (4.0 * PI);
        assert!((phase - 1.0).rem_euclid(2.0).min((1.0 - phase).rem_euclid(2.0)) < 0.1, "{phase}");
    }
}

#[test]
fn stereographic_image_is_the_sphere_solution() {
    let g = Grid::new(&[4.0 * PI, 4.0 * PI], &[64, 64]).unwrap();
    for t in [-1.5, 0.3, 2.0] {
        let u = blowup_u(t, 0.0, &g, 0.0).unwrap().field;
        let s = stereo_to_sphere(&u).unwrap();
        let want = blowup_sphere(t, &g).unwrap();
        for (a, b) in [(&s.s1, &want.s1), (&s.s2, &want.s2), (&s.s3, &want.s3)] {
            assert!(a.sub(b).max_abs() < 1e-12);
        }
        let back = sphere_to_stereo(&s).unwrap();
        assert!(back.sub(&u).max_abs() < 1e-10 * u.max_abs().max(1.0));
    }
}

#[test]
fn south_pole_is_rejected() {
    let g = make_grid(2, 2.0 * PI, 16).unwrap();
    let z = ComplexField::zeros(&g);
    let s = SphereField::new(z.clone(), z, ComplexField::from_fn(&g, |_| c(-1.0, 0.0))).unwrap();
    assert!(matches!(sphere_to_stereo(&s), Err(Error::Validation(_))));
}

#[test]
fn stereographic_norms_transfer_linearly_for_small_data() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[128, 128]).unwrap();
    let a = 1e-4;
    let u = modlab::families::gaussian::<f64>(&g, &[0.0, 0.0], &[0.0, 0.0], 1.0).scale(c(a, a));
    let r = stereo_norm_ratios(&u, &NormSpec::new(0.0, 2.0, 1.0).unwrap()).unwrap();
    // s₁ + i s₂ = 2u + O(|u|³), s₃ − 1 = O(|u|²)
    let half = 2f64.sqrt();
    assert!((r[0] / half - 1.0).abs() < 1e-6 && (r[1] / half - 1.0).abs() < 1e-6, "{r:?}");
    assert!(r[2] < 1e-3, "{r:?}");
}

fn inflation_grid() -> Grid<f64> {
    make_grid(1, 64.0 * PI, 32768).unwrap()
}

#[test]
fn illposed_data_matches_its_fourier_series() {
    let g = make_grid(1, 32.0 * PI, 8192).unwrap();
    let spec = IllposedSpec { n: 16.0, s: 0.25, eps: 0.125, kappa: 1 };
    let u = illposed_data(&spec, &g).unwrap();
    let coeffs = illposed_coefficients(&spec, &g).unwrap();
    assert!(!coeffs.is_empty());
    let mut err = 0.0f64;
    for j in (0..g.samples()[0]).step_by(97) {
        let x = g.x(0, j);
        let want: C64 = coeffs.iter().map(|&(m, c)| c * Complex::from_polar(1.0, m as f64 * g.dxi(0) * x)).sum();
        err = err.max((u.data()[j] - want).norm());
    }
    assert!(err < 1e-12 * u.max_abs(), "{err}");
    // the data are real and even
    assert!(u.data().iter().all(|z| z.im.abs() < 1e-12 * u.max_abs()));
}

#[test]
fn illposed_data_has_unit_size_at_the_critical_index() {
    let g = inflation_grid();
    let norm = |n: f64| {
        let u = illposed_data(&IllposedSpec { n, s: 0.5, eps: 0.125, kappa: 1 }, &g).unwrap();
        modulation_norm(&u, &NormSpec::new(0.5, 2.0, 1.0).unwrap(), &Partition::new()).unwrap()
    };
    let (a, b) = (norm(16.0), norm(32.0));
    assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
}

#[test]
fn illposed_spec_is_validated() {
    let g = inflation_grid();
    let ok = IllposedSpec { n: 16.0, s: 0.0, eps: 0.125, kappa: 1 };
    assert!(illposed_data(&ok, &g).is_ok());
    assert!(illposed_data(&IllposedSpec { eps: 0.2, ..ok }, &g).is_err());
    assert!(illposed_data(&IllposedSpec { n: 2.0, ..ok }, &g).is_err());
    assert!(illposed_data(&IllposedSpec { kappa: 0, ..ok }, &g).is_err());
    let small = make_grid(1, 64.0 * PI, 4096).unwrap();
    assert!(matches!(illposed_data(&IllposedSpec { n: 16.0, ..ok }, &small), Err(Error::Resolution(_))));
    let coarse = make_grid(1, 4.0 * PI, 2048).unwrap();
    assert!(matches!(illposed_data(&ok, &coarse), Err(Error::Resolution(_))));
}

#[test]
fn plateau_profile() {
    assert_eq!(plateau(0.0), 1.0);
    assert_eq!(plateau(0.5), 1.0);
    assert_eq!(plateau(-1.0), 0.0);
    assert!((plateau(0.75) - 0.5).abs() < 1e-15);
    for j in 0..100 {
        let r = 0.5 + j as f64 / 200.0;
        assert!(plateau(r) >= plateau(r + 0.005));
    }
}

#[test]
fn inflation_exponents() {
    let g = inflation_grid();
    let ns = [8.0, 16.0, 32.0, 64.0];
    let mut slopes = Vec::new();
    for s in [0.0, 0.25, 0.5] {
        let r = norm_inflation_sweep(1, s, 0.125, &ns, 0.05, &g, &Signature::elliptic(1)).unwrap();
        assert!((r.slope - r.predicted).abs() <= 0.2, "s={s}: {r:?}");
        slopes.push(r.slope);
    }
    assert!(slopes[0] > slopes[1] && slopes[1] > slopes[2]);
}

#[test]
fn exact_duhamel_term_matches_time_quadrature() {
    use modlab::solver::{free_evolution, nonlinearity_eval, NonlinearityKind, SolverParams};
    let g = make_grid(1, 32.0 * PI, 4096).unwrap();
    let sig = Signature::elliptic(1);
    let spec = IllposedSpec { n: 8.0, s: 0.0, eps: 0.125, kappa: 1 };
    let u0 = illposed_data(&spec, &g).unwrap();
    let t = 0.05;
    let mut p = SolverParams::linear(sig.clone(), 0.01, 0.01);
    p.kind = NonlinearityKind::PowerDerivative;
    p.lambda = vec![c(1.0, 0.0)];
    let free = free_evolution(&u0, &sig, t, 1601).unwrap();
    let forcing = free.map_slices(|s| nonlinearity_eval(s, &p).unwrap());
    let quad = modlab::propagator::duhamel(&forcing, &sig).unwrap();
    let exact = inflation_duhamel(&spec, &g, &sig, t).unwrap();
    let err = exact.rel_l2_diff(quad.slice(quad.len() - 1));
    assert!(err < 1e-4, "{err}");
}

#[test]
fn inflation_sweep_symmetries_and_preconditions() {
    let g = inflation_grid();
    let r = norm_inflation_sweep(1, 0.0, 0.125, &[8.0, 16.0], 0.05, &g, &Signature::elliptic(1)).unwrap();
    let r2 = norm_inflation_sweep(1, 0.0, 0.125, &[8.0, 16.0], 0.05, &g, &Signature::new(&[-1]).unwrap()).unwrap();
    // the data are real, so reversing the symbol conjugates the Duhamel term
    for (a, b) in r.norms.iter().zip(&r2.norms) {
        assert!((a.1 / b.1 - 1.0).abs() < 1e-10);
    }
    assert!(norm_inflation_sweep(1, 0.0, 0.125, &[8.0], 0.05, &g, &Signature::elliptic(1)).is_err());
    let g2 = make_grid(2, 8.0 * PI, 64).unwrap();
    assert!(norm_inflation_sweep(1, 0.0, 0.125, &[8.0, 16.0], 0.05, &g2, &Signature::elliptic(2)).is_err());
}

#[test]
fn weighted_sobolev_norm_of_a_gaussian() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[256, 256]).unwrap();
    let f = modlab::families::gaussian::<f64>(&g, &[0.0, 0.0], &[0.0, 0.0], 1.0);
    let scale = f.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    // ‖⟨x⟩² e^{−|x|²/2}‖₂ = ‖(1 − Δ)e^{−|x|²/2}‖₂ = (5π)^{1/2}
    let want = (5.0 * PI).sqrt() * scale;
    assert!((weighted_sobolev_norm(&f, 0.0, 2.0) / want - 1.0).abs() < 1e-8);
    assert!((weighted_sobolev_norm(&f, 2.0, 0.0) / want - 1.0).abs() < 1e-8);
    // mixed case against quadrature of ⟨x⟩(3 − |x|²)e^{−|x|²/2} in polar form
    let n = 200_000;
    let h = 20.0 / n as f64;
    let quad: f64 = (0..n)
        .map(|i| {
            let r = (i as f64 + 0.5) * h;
            (1.0 + r * r) * (3.0 - r * r).powi(2) * (-r * r).exp() * 2.0 * PI * r * h
        })
        .sum();
    let got = weighted_sobolev_norm(&f, 2.0, 1.0) / scale;
    assert!((got / quad.sqrt() - 1.0).abs() < 1e-8, "{got} vs {}", quad.sqrt());
}

#[test]
fn embedding_ratio_is_bounded_and_grid_stable() {
    let g = Grid::new(&[8.0 * PI, 8.0 * PI], &[256, 256]).unwrap();
    let r = embedding_refinement(&g, 3, 0.0, 1.5).unwrap();
    assert_eq!(r.report.ratios.len(), 20);
    assert!(r.report.max_ratio.is_finite() && r.report.max_ratio > 0.0);
    assert!(r.rel_change < 0.1, "{r:?}");
    let fam = embedding_family(&g, 3);
    assert!(matches!(embedding_sweep(&fam[..1], 0.0, 1.0), Err(Error::Validation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_points_are_unit(t in -50.0f64..50.0, x1 in -20.0f64..20.0, x2 in -20.0f64..20.0) {
        let s = sphere_point(t, [x1, x2]);
        prop_assert!(((s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stereographic_round_trip(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let g = make_grid(2, 2.0 * PI, 16).unwrap();
        let u = ComplexField::from_fn(&g, |x| c(re * (1.0 + 0.1 * x[0]), im));
        let back = sphere_to_stereo(&stereo_to_sphere(&u).unwrap()).unwrap();
        prop_assert!(back.sub(&u).max_abs() < 1e-12 * (1.0 + u.max_abs() * u.max_abs()));
    }
}
