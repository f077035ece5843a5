//! Concrete scenarios: the explicit blow-up solution of the 2D hyperbolic
//! Schrödinger map and its stereographic image, norm inflation for the
//! derivative equation below the critical index, and the weighted Sobolev
//! embedding into `M^s_{1,1}`.
//!
//! The blow-up solutions do not decay, so their checks use pointwise closed
//! forms and local finite-difference stencils, never FFTs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ensure;
use crate::estimates::fit_slope;
use crate::fields::{fourier_inverse, ComplexField, Grid, Signature};
use crate::freqdecomp::{Decomposition, NormSpec, Partition};
use crate::{Complex, Error, Result};

type C = Complex<f64>;
type Field = ComplexField<f64>;

/// Tolerance of the `|s| = 1` invariant.
pub const SPHERE_TOLERANCE: f64 = 1e-10;
/// `sphere_to_stereo` needs `1 + s₃` above this.
pub const SOUTH_POLE_GUARD: f64 = 1e-6;

/// A map into the unit sphere sampled on a grid; components are real fields.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereField {
    pub s1: Field,
    pub s2: Field,
    pub s3: Field,
}

impl SphereField {
    pub fn new(s1: Field, s2: Field, s3: Field) -> Result<Self> {
        ensure!(s1.grid() == s2.grid() && s2.grid() == s3.grid(), "components live on different grids");
        let s = Self { s1, s2, s3 };
        let imag = [&s.s1, &s.s2, &s.s3]
            .iter()
            .flat_map(|f| f.data().iter().map(|z| z.im.abs()))
            .fold(0.0, f64::max);
        ensure!(imag == 0.0, "sphere components must be real (max |Im| = {imag:e})");
        let d = s.unit_defect();
        ensure!(d <= SPHERE_TOLERANCE, "|s| = 1 violated by {d:e}");
        Ok(s)
    }

    pub fn grid(&self) -> &Grid<f64> {
        self.s1.grid()
    }

    /// `max | |s| − 1 |` over the nodes.
    pub fn unit_defect(&self) -> f64 {
        self.s1
            .data()
            .iter()
            .zip(self.s2.data())
            .zip(self.s3.data())
            .map(|((a, b), c)| ((a.re * a.re + b.re * b.re + c.re * c.re).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn bracket_t(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

fn real_field(grid: &Grid<f64>, f: impl Fn(&[f64]) -> f64) -> Field {
    ComplexField::from_fn(grid, |x| C::new(f(x), 0.0))
}

/// `s(t, x) = (−t/⟨t⟩, sin θ/⟨t⟩, cos θ/⟨t⟩)`, `θ = (x₁² − x₂²)/(4⟨t⟩)`.
pub fn sphere_point(t: f64, x: [f64; 2]) -> [f64; 3] {
    let b = bracket_t(t);
    let th = (x[0] * x[0] - x[1] * x[1]) / (4.0 * b);
    [-t / b, th.sin() / b, th.cos() / b]
}

pub fn blowup_sphere(t: f64, grid: &Grid<f64>) -> Result<SphereField> {
    ensure!(grid.dim() == 2, "the blow-up solution lives in 2D");
    let comp = |i: usize| real_field(grid, |x| sphere_point(t, [x[0], x[1]])[i]);
    SphereField::new(comp(0), comp(1), comp(2))
}

/// Square patch `|x − centre|_∞ ≤ radius` sampled with the given spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: [f64; 2],
    pub radius: f64,
    pub spacing: f64,
}

impl Patch {
    pub fn new(center: [f64; 2], radius: f64, spacing: f64) -> Result<Self> {
        ensure!(radius >= 0.0 && spacing > 0.0, "patch needs radius ≥ 0 and spacing > 0");
        Ok(Self { center, radius, spacing })
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let m = (self.radius / self.spacing).floor() as i64;
        let mut out = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                out.push([self.center[0] + i as f64 * self.spacing, self.center[1] + j as f64 * self.spacing]);
            }
        }
        out
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Second-order centred `□ = ∂²_{x₁} − ∂²_{x₂}` of a pointwise map.
fn box_stencil<const M: usize>(f: impl Fn([f64; 2]) -> [f64; M], x: [f64; 2], h: f64) -> [f64; M] {
    let e = [f([x[0] + h, x[1]]), f([x[0] - h, x[1]]), f([x[0], x[1] + h]), f([x[0], x[1] - h])];
    std::array::from_fn(|i| (e[0][i] + e[1][i] - e[2][i] - e[3][i]) / (h * h))
}

/// The printed closed forms of `□s₂` and `□s₃`.
pub fn printed_box_s(t: f64, x: [f64; 2]) -> [f64; 2] {
    let b = bracket_t(t);
    let q = x[0] * x[0] - x[1] * x[1];
    let th = q / (4.0 * b);
    let (s, c) = th.sin_cos();
    [
        c / (b * b) - q / (4.0 * b * b * b) * s,
        -s / (b * b) - q / (4.0 * b * b * b) * c,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmapResidual {
    /// `max |∂_t s − s × □s|` over the patch.
    pub residual: f64,
    /// `max |□s₂ − printed|` and the same for `s₃`.
    pub box_s2_discrepancy: f64,
    pub box_s3_discrepancy: f64,
    /// `max |□s₁|`, zero in exact arithmetic.
    pub box_s1: f64,
}

/// Residual of `s_t = s × □s` for the blow-up solution at time `t`, with
/// centred differences of step `h` in `t` and `x`.
pub fn schmap_residual(t: f64, patch: &Patch, h: f64) -> Result<SchmapResidual> {
    ensure!(h > 0.0, "stencil width must be positive");
    let f = |x: [f64; 2]| sphere_point(t, x);
    let mut out = SchmapResidual { residual: 0.0, box_s2_discrepancy: 0.0, box_s3_discrepancy: 0.0, box_s1: 0.0 };
    for x in patch.points() {
        let s = f(x);
        let sp = sphere_point(t + h, x);
        let sm = sphere_point(t - h, x);
        let st: [f64; 3] = std::array::from_fn(|i| (sp[i] - sm[i]) / (2.0 * h));
        let bs = box_stencil(f, x, h);
        let rhs = cross(s, bs);
        let r = (0..3).map(|i| (st[i] - rhs[i]).powi(2)).sum::<f64>().sqrt();
        let printed = printed_box_s(t, x);
        out.residual = out.residual.max(r);
        out.box_s1 = out.box_s1.max(bs[0].abs());
        out.box_s2_discrepancy = out.box_s2_discrepancy.max((bs[1] - printed[0]).abs());
        out.box_s3_discrepancy = out.box_s3_discrepancy.max((bs[2] - printed[1]).abs());
    }
    Ok(out)
}

/// `u(t, x) = (T − t + i sin θ)/(⟨t − T⟩ + cos θ)`, `θ = (x₁² − x₂²)/(4⟨t − T⟩)`,
/// or `None` on the singular set.
pub fn blowup_point(t: f64, t_blow: f64, x: [f64; 2]) -> Option<C> {
    let tau = t - t_blow;
    let b = bracket_t(tau);
    let th = (x[0] * x[0] - x[1] * x[1]) / (4.0 * b);
    let den = b + th.cos();
    if den.abs() < f64::EPSILON {
        return None;
    }
    Some(C::new(-tau, th.sin()) / den)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupField {
    /// Values, with suppressed nodes set to zero.
    pub field: Field,
    /// Flat indices where `⟨t − T⟩ + cos θ` is below the threshold.
    pub near_singular: Vec<usize>,
    /// Flat indices where the value is undefined (only possible at `t = T`).
    pub suppressed: Vec<usize>,
    pub min_denominator: f64,
    pub max_abs: f64,
}

/// Sample the blow-up solution with blow-up time `t_blow`, flagging nodes
/// whose denominator falls below `threshold`.
pub fn blowup_u(t: f64, t_blow: f64, grid: &Grid<f64>, threshold: f64) -> Result<BlowupField> {
    ensure!(grid.dim() == 2, "the blow-up solution lives in 2D");
    let tau = t - t_blow;
    let b = bracket_t(tau);
    let coords: Vec<Vec<f64>> = (0..2).map(|i| grid.coords(i)).collect();
    let mut data = vec![C::new(0.0, 0.0); grid.len()];
    let mut near = Vec::new();
    let mut suppressed = Vec::new();
    let mut min_den = f64::INFINITY;
    let mut max_abs = 0.0f64;
    for (flat, z) in data.iter_mut().enumerate() {
        let idx = grid.unravel(flat);
        let x = [coords[0][idx[0]], coords[1][idx[1]]];
        let th = (x[0] * x[0] - x[1] * x[1]) / (4.0 * b);
        let den = b + th.cos();
        min_den = min_den.min(den);
        if den < threshold {
            near.push(flat);
        }
        match blowup_point(t, t_blow, x) {
            Some(v) => {
                *z = v;
                max_abs = max_abs.max(v.norm());
            }
            None => suppressed.push(flat),
        }
    }
    Ok(BlowupField {
        field: Field::new(grid, data)?,
        near_singular: near,
        suppressed,
        min_denominator: min_den,
        max_abs,
    })
}

/// `max |u|` along the curve `x₁² − x₂² = 4π` (sampled at `count` points with
/// `x₂ ∈ [−extent, extent]`) at time `t`.
pub fn blowup_curve_max(t: f64, t_blow: f64, extent: f64, count: usize) -> f64 {
    (0..count)
        .filter_map(|j| {
            let x2 = -extent + 2.0 * extent * j as f64 / (count.max(2) - 1) as f64;
            let x1 = (4.0 * std::f64::consts::PI + x2 * x2).sqrt();
            blowup_point(t, t_blow, [x1, x2]).map(|v| v.norm())
        })
        .fold(0.0, f64::max)
}

/// Sign of `□u` in the equation solved by the blow-up solution:
/// `i u_t + □u = 2ū/(1 + |u|²)(u²_{x₁} − u²_{x₂})`, the stereographic image
/// of `s_t = s × □s`. Writing `−□u` leaves an O(1) residual.
pub const BLOWUP_BOX_SIGN: f64 = 1.0;

/// Residual of `i u_t + box_sign·□u = 2ū/(1 + |u|²)(u²_{x₁} − u²_{x₂})` for the
/// blow-up solution, by centred differences on the patch. Points whose
/// denominator is below `1e-2` are skipped; the result is
/// `(max residual, points used)`.
pub fn blowup_residual(t: f64, t_blow: f64, patch: &Patch, h: f64, box_sign: f64) -> Result<(f64, usize)> {
    ensure!(h > 0.0, "stencil width must be positive");
    let u = |t: f64, x: [f64; 2]| blowup_point(t, t_blow, x);
    let mut worst = 0.0f64;
    let mut used = 0;
    for x in patch.points() {
        let b = bracket_t(t - t_blow);
        let th = (x[0] * x[0] - x[1] * x[1]) / (4.0 * b);
        if b + th.cos() < 1e-2 {
            continue;
        }
        let vals = [
            u(t, x),
            u(t + h, x),
            u(t - h, x),
            u(t, [x[0] + h, x[1]]),
            u(t, [x[0] - h, x[1]]),
            u(t, [x[0], x[1] + h]),
            u(t, [x[0], x[1] - h]),
        ];
        let Some(v) = vals.iter().copied().collect::<Option<Vec<C>>>() else {
            continue;
        };
        let ut = (v[1] - v[2]) / (2.0 * h);
        let u1 = (v[3] - v[4]) / (2.0 * h);
        let u2 = (v[5] - v[6]) / (2.0 * h);
        let boxu = (v[3] + v[4] - v[5] - v[6]) / (h * h);
        let lhs = C::i() * ut + boxu * box_sign;
        let rhs = v[0].conj() * 2.0 / (1.0 + v[0].norm_sqr()) * (u1 * u1 - u2 * u2);
        worst = worst.max((lhs - rhs).norm());
        used += 1;
    }
    Ok((worst, used))
}

/// `s = (2 Re u, 2 Im u, 1 − |u|²)/(1 + |u|²)`
pub fn stereo_to_sphere(u: &Field) -> Result<SphereField> {
    let g = u.grid();
    let comp = |f: fn(C) -> f64| {
        let data = u.data().iter().map(|&z| C::new(f(z), 0.0)).collect();
        Field::new(g, data)
    };
    SphereField::new(
        comp(|z| 2.0 * z.re / (1.0 + z.norm_sqr()))?,
        comp(|z| 2.0 * z.im / (1.0 + z.norm_sqr()))?,
        comp(|z| (1.0 - z.norm_sqr()) / (1.0 + z.norm_sqr()))?,
    )
}

/// `u = (s₁ + i s₂)/(1 + s₃)`
pub fn sphere_to_stereo(s: &SphereField) -> Result<Field> {
    let lowest = s.s3.data().iter().map(|z| 1.0 + z.re).fold(f64::INFINITY, f64::min);
    ensure!(
        lowest > SOUTH_POLE_GUARD,
        "stereographic chart undefined near the south pole (min 1 + s₃ = {lowest:e})"
    );
    let data = s
        .s1
        .data()
        .iter()
        .zip(s.s2.data())
        .zip(s.s3.data())
        .map(|((a, b), c)| C::new(a.re, b.re) / (1.0 + c.re))
        .collect();
    Field::new(s.grid(), data)
}

/// `‖s₁‖, ‖s₂‖, ‖s₃ − 1‖` in `spec`, each divided by `‖u‖` in the same norm,
/// for `s` the stereographic image of `u`.
pub fn stereo_norm_ratios(u: &Field, spec: &NormSpec) -> Result<[f64; 3]> {
    let dec = Decomposition::new(u.grid(), &Partition::new())?;
    let base = dec.modulation_norm(u, spec)?;
    ensure!(base > 0.0, "zero field has no norm ratio");
    let s = stereo_to_sphere(u)?;
    let s3m = s.s3.map(|z| z - C::new(1.0, 0.0));
    Ok([
        dec.modulation_norm(&s.s1, spec)? / base,
        dec.modulation_norm(&s.s2, spec)? / base,
        dec.modulation_norm(&s3m, spec)? / base,
    ])
}

// ---------------------------------------------------------------------------
// Norm inflation

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IllposedSpec {
    /// Carrier frequency `N`.
    pub n: f64,
    pub s: f64,
    pub eps: f64,
    pub kappa: u32,
}

impl IllposedSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.eps > 0.0 && self.eps <= 0.125, "bump width needs 0 < ε ≤ 1/8 (ε = {})", self.eps);
        ensure!(self.n >= 4.0, "carrier needs N ≥ 4 (N = {})", self.n);
        ensure!(self.kappa >= 1, "κ must be a positive integer");
        Ok(())
    }

    fn check_band(&self, grid: &Grid<f64>) -> Result<()> {
        let need = (2 * self.kappa + 1) as f64 * self.n + 2.0;
        let have = grid.max_xi(0);
        if have < need {
            return Err(Error::Resolution(format!(
                "grid band {have} does not reach (2κ+1)N + 2 = {need}"
            )));
        }
        for i in 0..grid.dim() {
            if grid.dxi(i) > self.eps / 4.0 {
                return Err(Error::Resolution(format!(
                    "Δξ = {} on axis {i} does not resolve the bump width ε = {}",
                    grid.dxi(i),
                    self.eps
                )));
            }
        }
        Ok(())
    }
}

/// `φ` on ℝ: 1 on `[−1/2, 1/2]`, 0 outside `[−1, 1]`, smooth in between
/// (a smoothstep built from the standard mollifier).
pub fn plateau(r: f64) -> f64 {
    let a = r.abs();
    if a <= 0.5 {
        return 1.0;
    }
    if a >= 1.0 {
        return 0.0;
    }
    let x = 2.0 * (1.0 - a);
    let f = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    f(x) / (f(x) + f(1.0 - x))
}

/// `û = N^{−s}(φ((ξ₁ − N)/ε) + φ((ξ₁ + N)/ε)) Π_{j>1} φ(ξ_j/ε)`, as continuum
/// Fourier samples at the nodes.
fn illposed_spectrum(spec: &IllposedSpec, grid: &Grid<f64>, xi: &[f64]) -> f64 {
    let _ = grid;
    let mut v = plateau((xi[0] - spec.n) / spec.eps) + plateau((xi[0] + spec.n) / spec.eps);
    for x in &xi[1..] {
        v *= plateau(x / spec.eps);
    }
    v * spec.n.powf(-spec.s)
}

pub fn illposed_data(spec: &IllposedSpec, grid: &Grid<f64>) -> Result<Field> {
    spec.validate()?;
    spec.check_band(grid)?;
    let n = grid.dim();
    let mut data = vec![C::new(0.0, 0.0); grid.len()];
    let mut xi = vec![0.0; n];
    for (flat, z) in data.iter_mut().enumerate() {
        for (i, c) in grid.unravel(flat).into_iter().enumerate() {
            xi[i] = grid.xi_centered(i, c);
        }
        *z = C::new(illposed_spectrum(spec, grid, &xi), 0.0);
    }
    Ok(fourier_inverse(&Field::new(grid, data)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationReport {
    pub kappa: u32,
    pub s: f64,
    pub window: f64,
    /// `(N, sup_{t ∈ [T/2, T]} ‖𝒜∂₁(|v|^{2κ}v)(t)‖_{M^s_{2,1}})`
    pub norms: Vec<(f64, f64)>,
    /// Least-squares slope of `log norm` against `log N`.
    pub slope: f64,
    /// `1 − 2κs`
    pub predicted: f64,
}

/// Fourier-series coefficients of `u_{0,N}` on a 1-d grid: the data equals
/// `Σ c_m e^{iξ_m x}` with `c_m = Δξ/(2π) û(ξ_m)`, listed by mode `m`.
pub fn illposed_coefficients(spec: &IllposedSpec, grid: &Grid<f64>) -> Result<Vec<(i64, C)>> {
    spec.validate()?;
    ensure!(grid.dim() == 1, "coefficient listing is for 1-d grids");
    spec.check_band(grid)?;
    let dxi = grid.dxi(0);
    let half = (grid.samples()[0] / 2) as i64;
    Ok((-half..half)
        .filter_map(|m| {
            let v = illposed_spectrum(spec, grid, &[m as f64 * dxi]);
            (v != 0.0).then(|| (m, C::new(v * dxi / (2.0 * std::f64::consts::PI), 0.0)))
        })
        .collect())
}

/// Number of sample times in `[T/2, T]` for the supremum.
pub const INFLATION_TIMES: usize = 9;

/// The Duhamel term `𝒜∂₁(|v|^{2κ}v)` of the free flow `v = S(t)u₀` in 1D, as a
/// raw spectrum, by exact enumeration of the frequency tuples: with `v` a
/// finite Fourier sum, every tuple contributes `iξ Π c · ∫_0^t e^{i(t−τ)φ(ξ)}
/// e^{iτΦ} dτ` in closed form.
fn inflation_term(grid: &Grid<f64>, support: &[(i64, C)], kappa: u32, sig: f64, times: &[f64]) -> Vec<Vec<C>> {
    let n = grid.samples()[0];
    let dxi = grid.dxi(0);
    let support: Vec<(i64, f64, C)> = support.iter().map(|&(m, c)| (m, m as f64 * dxi, c)).collect();
    let phi = |xi: f64| sig * xi * xi;
    // partial products of `count` factors: (mode sum, phase sum, coefficient)
    let mut partial: Vec<(i64, f64, C)> = vec![(0, 0.0, C::new(1.0, 0.0))];
    for j in 0..(2 * kappa + 1) {
        let conj = j >= kappa + 1;
        let mut next = std::collections::HashMap::<(i64, u64), (f64, C)>::new();
        for &(m0, p0, c0) in &partial {
            for &(m, xi, c) in &support {
                let (dm, dp, dc) = if conj { (-m, -phi(xi), c.conj()) } else { (m, phi(xi), c) };
                // tuples with equal mode and phase sums merge exactly
                let p = p0 + dp;
                let key = (m0 + dm, p.to_bits());
                let e = next.entry(key).or_insert((p, C::new(0.0, 0.0)));
                e.1 += c0 * dc;
            }
        }
        partial = next.into_iter().map(|((m, _), (p, c))| (m, p, c)).collect();
        partial.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    times
        .iter()
        .map(|&t| {
            let mut out = vec![C::new(0.0, 0.0); n];
            for &(m, big_phi, c) in &partial {
                let idx = grid.raw_index(0, m);
                let xi = m as f64 * grid.dxi(0);
                let x = big_phi - phi(xi);
                // e^{itφ(ξ)} ∫_0^t e^{iτx} dτ
                let d = if (x * t).abs() < 1e-8 {
                    C::new(t, 0.5 * x * t * t)
                } else {
                    C::new((x * t).sin(), 1.0 - (x * t).cos()) / x
                };
                out[idx] += C::new(0.0, xi) * c * d * C::from_polar(1.0, t * phi(xi));
            }
            // raw DFT of Σ d_m e^{iξ_m x} on x_j = −L + jΔx is N d_m (−1)^m
            for (m, z) in out.iter_mut().enumerate() {
                *z *= if m % 2 == 0 { n as f64 } else { -(n as f64) };
            }
            out
        })
        .collect()
}

/// `𝒜∂₁(|v|^{2κ}v)(t)` for `v = S(t)u_{0,N}` on a 1-d grid, evaluated exactly.
pub fn inflation_duhamel(spec: &IllposedSpec, grid: &Grid<f64>, signature: &Signature, t: f64) -> Result<Field> {
    ensure!(signature.dim() == 1, "signature must be 1-d");
    let support = illposed_coefficients(spec, grid)?;
    let mut terms = inflation_term(grid, &support, spec.kappa, signature.get::<f64>(0), &[t]);
    Ok(Field::from_dft(grid, terms.remove(0)))
}

/// Fitted exponent of the first Picard iterate's growth in `N` for data
/// `u_{0,N}`. One-dimensional; the carrier grid must resolve `(2κ+1) max N`.
pub fn norm_inflation_sweep(
    kappa: u32,
    s: f64,
    eps: f64,
    n_list: &[f64],
    window: f64,
    grid: &Grid<f64>,
    signature: &Signature,
) -> Result<InflationReport> {
    ensure!(grid.dim() == 1, "the inflation sweep runs on a 1-d grid");
    ensure!(signature.dim() == 1, "signature must be 1-d");
    ensure!(n_list.len() >= 2, "fitting an exponent needs at least two values of N");
    ensure!(window > 0.0 && window.is_finite(), "window must be positive");
    let sig = signature.get::<f64>(0);
    let dec = Decomposition::new(grid, &Partition::new())?;
    let norm = NormSpec::new(s, 2.0, 1.0)?;
    let times: Vec<f64> = (0..INFLATION_TIMES)
        .map(|j| window * (0.5 + 0.5 * j as f64 / (INFLATION_TIMES - 1) as f64))
        .collect();
    let norms = n_list
        .par_iter()
        .map(|&n| {
            let spec = IllposedSpec { n, s, eps, kappa };
            let support = illposed_coefficients(&spec, grid)?;
            let terms = inflation_term(grid, &support, kappa, sig, &times);
            let sup = terms.iter().map(|t| dec.modulation_norm_dft(t, &norm)).fold(0.0, f64::max);
            Ok((n, sup))
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = norms.iter().map(|(n, _)| n.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|(_, v)| v.ln()).collect();
    Ok(InflationReport {
        kappa,
        s,
        window,
        slope: fit_slope(&x, &y),
        predicted: 1.0 - 2.0 * kappa as f64 * s,
        norms,
    })
}

// ---------------------------------------------------------------------------
// Weighted Sobolev embedding

/// `‖⟨x⟩^b F⁻¹⟨ξ⟩^s F f‖₂`
pub fn weighted_sobolev_norm(f: &Field, s: f64, b: f64) -> f64 {
    let g = crate::fields::apply_multiplier(f, |xi| {
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        C::new((1.0 + r2).powf(s / 2.0), 0.0)
    });
    let grid = f.grid();
    let coords: Vec<Vec<f64>> = (0..grid.dim()).map(|i| grid.coords(i)).collect();
    let mut acc = crate::NeumaierSum::new();
    for (flat, z) in g.data().iter().enumerate() {
        let r2: f64 = grid.unravel(flat).iter().enumerate().map(|(i, &j)| coords[i][j].powi(2)).sum();
        acc.add((1.0 + r2).powf(b) * z.norm_sqr());
    }
    (acc.value() * grid.cell()).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub s: f64,
    pub b: f64,
    /// `(member name, ‖f‖_{M^s_{1,1}}/‖f‖_{H^{s+b,b}})`
    pub ratios: Vec<(String, f64)>,
    pub max_ratio: f64,
}

/// Twenty smooth localized test functions: Gaussians of several widths and
/// centres, modulated Gaussians with `|k| ≤ 10`, and compactly supported bumps.
pub fn embedding_family(grid: &Grid<f64>, seed: u64) -> Vec<(String, Field)> {
    use rand::Rng;
    let n = grid.dim();
    let mut r = crate::families::rng(seed);
    let mut out = Vec::new();
    for j in 0..7 {
        let w = 0.8 + 0.3 * j as f64;
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        out.push((format!("gaussian-{j}"), crate::families::gaussian(grid, &y, &vec![0.0; n], w)));
    }
    for j in 0..7 {
        let k: Vec<f64> = (0..n).map(|_| r.gen_range(-10i64..=10) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let w = r.gen_range(1.0..2.0);
        out.push((format!("modulated-{j}"), crate::families::gaussian(grid, &y, &k, w)));
    }
    for j in 0..6 {
        let rad = 4.0 + 0.5 * j as f64;
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let f = ComplexField::from_fn(grid, |x| {
            let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (rad * rad);
            C::new(if d2 < 1.0 { (-1.0 / (1.0 - d2)).exp() } else { 0.0 }, 0.0)
        });
        out.push((format!("bump-{j}"), f));
    }
    out
}

pub fn embedding_sweep(family: &[(String, Field)], s: f64, b: f64) -> Result<EmbeddingReport> {
    ensure!(!family.is_empty(), "empty family");
    let n = family[0].1.grid().dim() as f64;
    ensure!(b > n / 2.0, "the embedding needs b > n/2 (b = {b}, n = {n})");
    let dec = Decomposition::new(family[0].1.grid(), &Partition::new())?;
    let spec = NormSpec::new(s, 1.0, 1.0)?;
    let ratios = family
        .iter()
        .map(|(name, f)| {
            let m = dec.modulation_norm(f, &spec)?;
            let h = weighted_sobolev_norm(f, s + b, b);
            Ok((name.clone(), if h > 0.0 { m / h } else { 0.0 }))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(EmbeddingReport { s, b, ratios, max_ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRefinement {
    pub report: EmbeddingReport,
    /// The member attaining the maximum, re-evaluated on the refined grid.
    pub argmax: String,
    pub refined_ratio: f64,
    pub rel_change: f64,
}

/// The embedding sweep on `grid`, with the maximizing member recomputed on
/// the grid with every axis refined twofold.
pub fn embedding_refinement(grid: &Grid<f64>, seed: u64, s: f64, b: f64) -> Result<EmbeddingRefinement> {
    let report = embedding_sweep(&embedding_family(grid, seed), s, b)?;
    let (argmax, base) = report
        .ratios
        .iter()
        .cloned()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty family");
    let fine = grid.refined()?;
    let member = embedding_family(&fine, seed)
        .into_iter()
        .find(|(name, _)| *name == argmax)
        .expect("families share member names");
    let refined = embedding_sweep(&[member], s, b)?.max_ratio;
    Ok(EmbeddingRefinement {
        report,
        argmax,
        refined_ratio: refined,
        rel_change: (refined / base - 1.0).abs(),
    })
}
