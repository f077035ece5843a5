//! The Gaussian Gabor frame `g_{kl}(x) = e^{ik·x} e^{−|x−l|²/2}` on the unit
//! lattice: atoms, analysis/synthesis, the frame operator, canonical
//! coefficients and frame bounds.
//!
//! Atoms are treated as functions on the periodic box, so the box must be a
//! whole number of `π` per axis (`L_i/π ∈ ℤ`); then `e^{ik·x}` is periodic
//! for integer `k` and lands exactly on frequency nodes. Analysis of one
//! translate only touches a patch of ≈ 19 units around it, transformed with
//! a short FFT whose nodes contain the integers.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::ensure;
use crate::fields::{ComplexField, Grid};
use crate::freqdecomp::{bracket, reduce_lq, NormSpec};
use crate::{Complex, Error, NeumaierSum, Real, Result};

/// Truncation radii: `|k|_∞ ≤ k_rad`, `|l|_∞ ≤ l_rad`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub k_rad: usize,
    pub l_rad: usize,
}

impl Truncation {
    /// `K = K_max − 2`, `L_rad = ⌊L⌋ − 6` (smallest over axes).
    pub fn default_for<T: Real>(grid: &Grid<T>) -> Result<Self> {
        let k = (0..grid.dim()).map(|i| grid.k_max(i)).min().unwrap_or(0) - 2;
        let l = (0..grid.dim())
            .map(|i| grid.half_extents()[i].floor().as_f64() as i64)
            .min()
            .unwrap_or(0)
            - 6;
        ensure!(k >= 0 && l >= 0, "grid too small for a Gabor truncation");
        Ok(Self {
            k_rad: k as usize,
            l_rad: l as usize,
        })
    }
}

/// Coefficients `c_{kl}` on `[−K, K]^n × [−L, L]^n`, stored `k`-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameCoefficients<T: Real> {
    dim: usize,
    trunc: Truncation,
    values: Vec<Complex<T>>,
}

fn lattice_points(dim: usize, rad: usize) -> Vec<Vec<i64>> {
    let r = rad as i64;
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (-r..=r).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn lattice_flat(p: &[i64], rad: usize) -> Option<usize> {
    let w = 2 * rad + 1;
    let mut f = 0;
    for &v in p {
        if v.unsigned_abs() as usize > rad {
            return None;
        }
        f = f * w + (v + rad as i64) as usize;
    }
    Some(f)
}

impl<T: Real> FrameCoefficients<T> {
    pub fn zeros(dim: usize, trunc: Truncation) -> Self {
        let count = (2 * trunc.k_rad + 1).pow(dim as u32) * (2 * trunc.l_rad + 1).pow(dim as u32);
        Self {
            dim,
            trunc,
            values: vec![Complex::new(T::zero(), T::zero()); count],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn truncation(&self) -> Truncation {
        self.trunc
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }
    fn l_count(&self) -> usize {
        (2 * self.trunc.l_rad + 1).pow(self.dim as u32)
    }

    fn flat(&self, k: &[i64], l: &[i64]) -> Result<usize> {
        ensure!(k.len() == self.dim && l.len() == self.dim, "index dimension mismatch");
        let kf = lattice_flat(k, self.trunc.k_rad);
        let lf = lattice_flat(l, self.trunc.l_rad);
        match (kf, lf) {
            (Some(a), Some(b)) => Ok(a * self.l_count() + b),
            _ => Err(Error::Validation(format!(
                "index (k={k:?}, l={l:?}) outside truncation {:?}",
                self.trunc
            ))),
        }
    }

    pub fn get(&self, k: &[i64], l: &[i64]) -> Result<Complex<T>> {
        Ok(self.values[self.flat(k, l)?])
    }
    pub fn set(&mut self, k: &[i64], l: &[i64], v: Complex<T>) -> Result<()> {
        ensure!(v.re.is_finite() && v.im.is_finite(), "non-finite coefficient");
        let i = self.flat(k, l)?;
        self.values[i] = v;
        Ok(())
    }

    /// `(k, l, c_{kl})` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, Vec<i64>, Complex<T>)> + '_ {
        let ks = lattice_points(self.dim, self.trunc.k_rad);
        let ls = lattice_points(self.dim, self.trunc.l_rad);
        let nl = ls.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (ks[i / nl].clone(), ls[i % nl].clone(), v))
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Result<Self> {
        ensure!(
            self.dim == other.dim && self.trunc == other.trunc,
            "coefficient sets with different shapes"
        );
        Ok(Self {
            dim: self.dim,
            trunc: self.trunc,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| x * a + y * b)
                .collect(),
        })
    }
}

/// `m^s_{p,q}`: `(Σ_k ⟨k⟩^{sq} (Σ_l |c_{kl}|^p)^{q/p})^{1/q}`.
pub fn coefficient_norm<T: Real>(c: &FrameCoefficients<T>, spec: &NormSpec) -> Result<T> {
    spec.validate()?;
    let nl = c.l_count();
    let ks = lattice_points(c.dim, c.trunc.k_rad);
    let terms = ks.iter().enumerate().map(|(i, k)| {
        let row = &c.values[i * nl..(i + 1) * nl];
        let inner = reduce_lq(row.iter().map(|z| z.norm()), spec.p);
        T::lit(bracket(k).powf(spec.s)) * inner
    });
    Ok(reduce_lq(terms, spec.q))
}

/// Periodic displacement `x − l` folded into `[−L, L)`.
fn min_image(x: f64, l: f64, half: f64) -> f64 {
    let d = (x - l + half).rem_euclid(2.0 * half);
    d - half
}

/// Samples of `e^{ik·x} e^{−|x−l|²/2}` (periodic distance to `l`).
pub fn gauss_atom<T: Real>(k: &[i64], l: &[i64], grid: &Grid<T>) -> Result<ComplexField<T>> {
    let n = grid.dim();
    ensure!(k.len() == n && l.len() == n, "atom indices must have length {n}");
    for i in 0..n {
        let half = grid.half_extents()[i].as_f64();
        ensure!(
            (l[i] as f64).abs() <= half - 6.0,
            "atom centre l = {l:?} within 6 of the box face on axis {i}"
        );
    }
    let factors: Vec<Vec<Complex<T>>> = (0..n)
        .map(|i| {
            let half = grid.half_extents()[i].as_f64();
            (0..grid.samples()[i])
                .map(|j| {
                    let x = grid.x(i, j).as_f64();
                    let d = min_image(x, l[i] as f64, half);
                    let z = Complex::from_polar((-0.5 * d * d).exp(), k[i] as f64 * x);
                    Complex::new(T::lit(z.re), T::lit(z.im))
                })
                .collect()
        })
        .collect();
    let mut data = vec![Complex::new(T::one(), T::zero()); grid.len()];
    grid.apply_separable(&mut data, &factors);
    ComplexField::new(grid, data)
}

/// Gaussian window reach: `e^{−R²/2} ≈ 2.6e−18`.
const WINDOW_REACH: f64 = 9.0;

#[derive(Clone)]
struct AxisPatch {
    /// patch length in nodes
    len: usize,
    /// integer frequency `k` sits at patch DFT index `k·mult mod len`
    mult: usize,
}

/// Analysis/synthesis operators for one grid and truncation.
#[derive(Clone)]
pub struct GaborSystem<T: Real> {
    grid: Grid<T>,
    trunc: Truncation,
    axes: Vec<AxisPatch>,
    fwd: Vec<Arc<dyn Fft<T>>>,
    inv: Vec<Arc<dyn Fft<T>>>,
    l_points: Vec<Vec<i64>>,
    k_points: Vec<Vec<i64>>,
}

impl<T: Real> GaborSystem<T> {
    pub fn new(grid: &Grid<T>, trunc: Truncation) -> Result<Self> {
        let n = grid.dim();
        let mut axes = Vec::with_capacity(n);
        for i in 0..n {
            let half = grid.half_extents()[i].as_f64();
            let a = (half / std::f64::consts::PI).round();
            ensure!(
                a >= 1.0 && (half - a * std::f64::consts::PI).abs() < 1e-9 * half,
                "axis {i}: Gabor frames need a half extent that is a multiple of π (got {half})"
            );
            let a = a as usize;
            let nn = grid.samples()[i];
            ensure!(
                trunc.l_rad as f64 <= half - 6.0,
                "translation radius {} too close to the box face (L = {half:.3})",
                trunc.l_rad
            );
            ensure!(
                (trunc.k_rad as i64) <= grid.k_max(i),
                "modulation radius {} exceeds lattice radius {} on axis {i}",
                trunc.k_rad,
                grid.k_max(i)
            );
            // patch of 2πm ≥ 2R units with m·N/a integral; whole axis otherwise
            let mut patch = AxisPatch { len: nn, mult: a };
            for m in 1..a {
                if 2.0 * std::f64::consts::PI * m as f64 >= 2.0 * WINDOW_REACH && (m * nn) % a == 0 {
                    patch = AxisPatch {
                        len: m * nn / a,
                        mult: m,
                    };
                    break;
                }
            }
            axes.push(patch);
        }
        let mut planner = FftPlanner::new();
        let fwd = axes.iter().map(|p| planner.plan_fft_forward(p.len)).collect();
        let inv = axes.iter().map(|p| planner.plan_fft_inverse(p.len)).collect();
        Ok(Self {
            grid: grid.clone(),
            trunc,
            axes,
            fwd,
            inv,
            l_points: lattice_points(n, trunc.l_rad),
            k_points: lattice_points(n, trunc.k_rad),
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    /// First grid node of the patch around `l` and the per-node window/phase data.
    fn patch_geometry(&self, l: &[i64]) -> Vec<(i64, Vec<T>)> {
        (0..self.grid.dim())
            .map(|i| {
                let p = &self.axes[i];
                let half = self.grid.half_extents()[i].as_f64();
                let dx = self.grid.dx(i).as_f64();
                let start = if p.len == self.grid.samples()[i] {
                    0
                } else {
                    ((l[i] as f64 - 0.5 * p.len as f64 * dx + half) / dx).round() as i64
                };
                let w = (0..p.len)
                    .map(|q| {
                        let x = -half + (start + q as i64) as f64 * dx;
                        let d = min_image(x, l[i] as f64, half);
                        T::lit((-0.5 * d * d).exp())
                    })
                    .collect();
                (start, w)
            })
            .collect()
    }

    fn patch_len(&self) -> usize {
        self.axes.iter().map(|p| p.len).product()
    }

    fn patch_fft(&self, buf: &mut [Complex<T>], inverse: bool) {
        let dims: Vec<usize> = self.axes.iter().map(|p| p.len).collect();
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let mut lane = Vec::new();
        for i in 0..dims.len() {
            let fft = if inverse { &self.inv[i] } else { &self.fwd[i] };
            let n = dims[i];
            let s = strides[i];
            if s == 1 {
                fft.process(buf);
                continue;
            }
            lane.resize(n * s, Complex::new(T::zero(), T::zero()));
            for block in buf.chunks_mut(n * s) {
                for j in 0..n {
                    for t in 0..s {
                        lane[t * n + j] = block[j * s + t];
                    }
                }
                fft.process(&mut lane);
                for j in 0..n {
                    for t in 0..s {
                        block[j * s + t] = lane[t * n + j];
                    }
                }
            }
        }
    }

    /// Grid flat index of each patch node.
    fn patch_nodes(&self, geom: &[(i64, Vec<T>)]) -> Vec<(usize, T)> {
        let strides = self.grid.strides();
        let mut out = vec![(0usize, T::one())];
        for (i, (start, w)) in geom.iter().enumerate() {
            let nn = self.grid.samples()[i] as i64;
            let mut next = Vec::with_capacity(out.len() * w.len());
            for &(base, wb) in &out {
                for (q, &wq) in w.iter().enumerate() {
                    let g = (start + q as i64).rem_euclid(nn) as usize;
                    next.push((base + g * strides[i], wb * wq));
                }
            }
            out = next;
        }
        out
    }

    /// Patch DFT index and continuum phase `e^{−ik·x_start}` for modulation `k`.
    fn k_slot(&self, k: &[i64], geom: &[(i64, Vec<T>)]) -> (usize, T) {
        let mut idx = 0;
        let mut phase = 0.0;
        for i in 0..k.len() {
            let p = &self.axes[i];
            let slot = (k[i] * p.mult as i64).rem_euclid(p.len as i64) as usize;
            idx = idx * p.len + slot;
            let half = self.grid.half_extents()[i].as_f64();
            let x0 = -half + geom[i].0 as f64 * self.grid.dx(i).as_f64();
            phase += k[i] as f64 * x0;
        }
        (idx, T::lit(phase))
    }

    /// `c_{kl} = ⟨f, g_{kl}⟩` for every truncated `(k, l)`.
    pub fn analysis(&self, f: &ComplexField<T>) -> Result<FrameCoefficients<T>> {
        crate::fields::check_grid(&self.grid, f.grid())?;
        let cell = self.grid.cell();
        let nk = self.k_points.len();
        let per_l: Vec<Vec<Complex<T>>> = self
            .l_points
            .par_iter()
            .map(|l| {
                let geom = self.patch_geometry(l);
                let nodes = self.patch_nodes(&geom);
                let mut buf: Vec<Complex<T>> = nodes.iter().map(|&(g, w)| f.data()[g] * w).collect();
                self.patch_fft(&mut buf, false);
                self.k_points
                    .iter()
                    .map(|k| {
                        let (slot, ph) = self.k_slot(k, &geom);
                        buf[slot] * Complex::from_polar(cell, -ph)
                    })
                    .collect()
            })
            .collect();
        let mut c = FrameCoefficients::zeros(self.grid.dim(), self.trunc);
        let nl = self.l_points.len();
        for (li, row) in per_l.into_iter().enumerate() {
            for ki in 0..nk {
                c.values[ki * nl + li] = row[ki];
            }
        }
        Ok(c)
    }

    /// `Σ c_{kl} g_{kl}`
    pub fn synthesis(&self, c: &FrameCoefficients<T>) -> Result<ComplexField<T>> {
        ensure!(
            c.dim == self.grid.dim() && c.trunc == self.trunc,
            "coefficients do not match this Gabor system"
        );
        let nl = self.l_points.len();
        let plen = self.patch_len();
        // patches overlap, so accumulate per-l contributions serially in l order
        let pieces: Vec<Option<(Vec<(usize, T)>, Vec<Complex<T>>)>> = self
            .l_points
            .par_iter()
            .enumerate()
            .map(|(li, l)| {
                let any = (0..self.k_points.len()).any(|ki| {
                    let v = c.values[ki * nl + li];
                    v.re != T::zero() || v.im != T::zero()
                });
                if !any {
                    return None;
                }
                let geom = self.patch_geometry(l);
                let mut buf = vec![Complex::new(T::zero(), T::zero()); plen];
                for (ki, k) in self.k_points.iter().enumerate() {
                    let (slot, ph) = self.k_slot(k, &geom);
                    buf[slot] = buf[slot] + c.values[ki * nl + li] * Complex::from_polar(T::one(), ph);
                }
                self.patch_fft(&mut buf, true);
                Some((self.patch_nodes(&geom), buf))
            })
            .collect();
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.grid.len()];
        for (nodes, buf) in pieces.into_iter().flatten() {
            for (&(g, w), &z) in nodes.iter().zip(&buf) {
                out[g] = out[g] + z * w;
            }
        }
        Ok(ComplexField::raw(&self.grid, out))
    }

    /// `S f = Σ ⟨f, g_{kl}⟩ g_{kl}`
    pub fn frame_operator(&self, f: &ComplexField<T>) -> Result<ComplexField<T>> {
        self.synthesis(&self.analysis(f)?)
    }

    /// Fraction of `‖f‖²` outside the region the truncated lattice covers
    /// (`|x|_∞ ≤ L_rad + 2` and `|ξ|_∞ ≤ K + 2`).
    pub fn uncovered_fraction(&self, f: &ComplexField<T>) -> T {
        let total = f.data().iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if total == T::zero() {
            return T::zero();
        }
        let xr = T::of_usize(self.trunc.l_rad + 2);
        let kr = T::of_usize(self.trunc.k_rad + 2);
        let mut outside_x = T::zero();
        for (flat, z) in f.data().iter().enumerate() {
            let idx = self.grid.unravel(flat);
            if (0..self.grid.dim()).any(|i| self.grid.x(i, idx[i]).abs() > xr) {
                outside_x = outside_x + z.norm_sqr();
            }
        }
        let spec = f.dft();
        let freqs: Vec<Vec<T>> = (0..self.grid.dim()).map(|i| self.grid.freqs(i)).collect();
        let mut outside_k = T::zero();
        let mut spec_total = T::zero();
        for (flat, z) in spec.iter().enumerate() {
            let idx = self.grid.unravel(flat);
            spec_total = spec_total + z.norm_sqr();
            if (0..self.grid.dim()).any(|i| freqs[i][idx[i]].abs() > kr) {
                outside_k = outside_k + z.norm_sqr();
            }
        }
        (outside_x / total).max(outside_k / spec_total)
    }

    /// Canonical coefficients `⟨S⁻¹f, g_{kl}⟩`, with `S h = f` solved by
    /// conjugate gradients.
    pub fn analyze(&self, f: &ComplexField<T>, tol: f64, max_iter: usize) -> Result<FrameCoefficients<T>> {
        let h = self.solve(f, tol, max_iter)?;
        self.analysis(&h)
    }

    fn solve(&self, f: &ComplexField<T>, tol: f64, max_iter: usize) -> Result<ComplexField<T>> {
        crate::fields::check_grid(&self.grid, f.grid())?;
        let dot = |a: &[Complex<T>], b: &[Complex<T>]| {
            let mut acc = NeumaierSum::new();
            for (x, y) in a.iter().zip(b) {
                acc.add((x.conj() * y).re);
            }
            acc.value()
        };
        let bnorm = dot(f.data(), f.data()).sqrt();
        let mut x = ComplexField::zeros(&self.grid);
        if bnorm == T::zero() {
            return Ok(x);
        }
        let mut r = f.clone();
        let mut p = r.clone();
        let mut rr = dot(r.data(), r.data());
        let tol = T::lit(tol);
        for it in 0..max_iter {
            if rr.sqrt() <= tol * bnorm {
                return Ok(x);
            }
            let sp = self.frame_operator(&p)?;
            let psp = dot(p.data(), sp.data());
            if psp <= T::zero() {
                return Err(Error::Convergence {
                    what: "frame operator inversion (lost positivity)",
                    iterations: it,
                    residual: (rr.sqrt() / bnorm).as_f64(),
                });
            }
            let alpha = Complex::new(rr / psp, T::zero());
            x.axpy(alpha, &p);
            r.axpy(-alpha, &sp);
            let rr_new = dot(r.data(), r.data());
            let beta = rr_new / rr;
            rr = rr_new;
            p = r.add(&p.scale(Complex::new(beta, T::zero())));
        }
        if rr.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        Err(Error::Convergence {
            what: "frame operator inversion",
            iterations: max_iter,
            residual: (rr.sqrt() / bnorm).as_f64(),
        })
    }
}

pub const CG_TOLERANCE: f64 = 1e-10;
pub const CG_MAX_ITER: usize = 500;

/// `S f` together with a flag raised when `f` has more than `1e−10` of its
/// energy outside the truncated lattice's coverage.
pub fn frame_operator_apply<T: Real>(
    f: &ComplexField<T>,
    trunc: Truncation,
) -> Result<(ComplexField<T>, bool)> {
    let sys = GaborSystem::new(f.grid(), trunc)?;
    let warn = sys.uncovered_fraction(f) > T::lit(1e-10);
    Ok((sys.frame_operator(f)?, warn))
}

pub fn analyze<T: Real>(f: &ComplexField<T>, trunc: Truncation) -> Result<FrameCoefficients<T>> {
    GaborSystem::new(f.grid(), trunc)?.analyze(f, CG_TOLERANCE, CG_MAX_ITER)
}

pub fn synthesize<T: Real>(c: &FrameCoefficients<T>, grid: &Grid<T>) -> Result<ComplexField<T>> {
    GaborSystem::new(grid, c.trunc)?.synthesis(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub a: f64,
    pub b: f64,
    /// dimension of the interior subspace the quotients were taken over
    pub rank: usize,
}

/// Atoms this far inside the truncation see the full lattice around them.
pub const INTERIOR_MARGIN: usize = 6;

/// Gram eigenvalues below this fraction of the largest are dropped: their
/// directions are near-cancelling atom sums that need not stay interior.
pub const GRAM_CUTOFF: f64 = 1e-4;

/// Extreme Rayleigh quotients of `S` over the span of the interior atoms
/// (`|k|_∞ ≤ K − 6`, `|l|_∞ ≤ L_rad − 6`): `B` by power iteration and `A` by
/// inverse iteration on `S` compressed to the well-conditioned part of the span.
pub fn frame_bounds<T: Real>(grid: &Grid<T>, trunc: Truncation) -> Result<FrameBounds> {
    frame_bounds_with(grid, trunc, INTERIOR_MARGIN, GRAM_CUTOFF)
}

fn frame_bounds_with<T: Real>(grid: &Grid<T>, trunc: Truncation, margin: usize, cutoff: f64) -> Result<FrameBounds> {
    let sys = GaborSystem::new(grid, trunc)?;
    if trunc.k_rad < margin || trunc.l_rad < margin {
        return Err(Error::Numerical(format!(
            "truncation {trunc:?} has no interior atoms; a lattice that small cannot frame"
        )));
    }
    let n = grid.dim();
    let ks = lattice_points(n, trunc.k_rad - margin);
    let ls = lattice_points(n, trunc.l_rad - margin);
    let to64 = |f: &ComplexField<T>| -> Vec<Complex<f64>> {
        f.data().iter().map(|z| Complex::new(z.re.as_f64(), z.im.as_f64())).collect()
    };
    let pairs: Vec<(&Vec<i64>, &Vec<i64>)> = ks.iter().flat_map(|k| ls.iter().map(move |l| (k, l))).collect();
    let atoms: Vec<(Vec<Complex<f64>>, Vec<Complex<f64>>)> = pairs
        .par_iter()
        .map(|(k, l)| {
            let a = gauss_atom(k, l, grid)?;
            Ok((to64(&a), to64(&sys.frame_operator(&a)?)))
        })
        .collect::<Result<_>>()?;
    let na = atoms.len();
    let dotc = |a: &[Complex<f64>], b: &[Complex<f64>]| -> Complex<f64> {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    };
    // Gram matrix and S in the atom basis; the cell weight cancels in quotients
    let entries: Vec<(Complex<f64>, Complex<f64>)> = (0..na * na)
        .into_par_iter()
        .map(|ij| {
            let (i, j) = (ij / na, ij % na);
            (dotc(&atoms[i].0, &atoms[j].0), dotc(&atoms[i].0, &atoms[j].1))
        })
        .collect();
    let hermitian = |f: &dyn Fn(usize) -> Complex<f64>| {
        let m = DMatrix::from_fn(na, na, |i, j| f(i * na + j));
        (&m + m.adjoint()) * Complex::new(0.5, 0.0)
    };
    let gram = hermitian(&|ij| entries[ij].0);
    let smat = hermitian(&|ij| entries[ij].1);
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.max();
    let keep: Vec<usize> = (0..na).filter(|&i| eig.eigenvalues[i] >= cutoff * top).collect();
    let r = keep.len();
    // orthonormal basis of the kept span in atom coordinates: W = V Λ^{−1/2}
    let w = DMatrix::from_fn(na, r, |i, c| {
        eig.eigenvectors[(i, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
    });
    let mc = w.adjoint() * smat * &w;
    let mut m = vec![Complex::new(0.0, 0.0); r * r];
    for i in 0..r {
        for j in 0..r {
            m[i * r + j] = (mc[(i, j)] + mc[(j, i)].conj()) * 0.5;
        }
    }
    let b = power_extreme(r, |v| matvec(&m, r, v))?;
    let chol = cholesky(&m, r).ok_or_else(|| {
        Error::Numerical("frame operator not positive definite on the interior span".into())
    })?;
    let inv_top = power_extreme(r, |v| chol_solve(&chol, r, v))?;
    let a = 1.0 / inv_top;
    if !(a > 1e-8 * b) {
        return Err(Error::Numerical(format!(
            "lower frame bound {a:.3e} indistinguishable from zero (B = {b:.3e})"
        )));
    }
    Ok(FrameBounds { a, b, rank: r })
}

fn matvec(m: &[Complex<f64>], r: usize, v: &[Complex<f64>]) -> Vec<Complex<f64>> {
    (0..r)
        .map(|i| m[i * r..(i + 1) * r].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Largest eigenvalue of the positive operator `op` by power iteration:
/// at least 50 steps, then until the Rayleigh quotient settles.
fn power_extreme(
    r: usize,
    op: impl Fn(&[Complex<f64>]) -> Vec<Complex<f64>>,
) -> Result<f64> {
    let mut v: Vec<Complex<f64>> = (0..r)
        .map(|i| Complex::new(1.0 + 0.37 * ((i * 7919) % 13) as f64, 0.11 * (i % 5) as f64))
        .collect();
    let norm = |v: &[Complex<f64>]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut lambda = 0.0;
    for it in 0..20_000 {
        let w = op(&v);
        let rq: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let nw = norm(&w);
        if nw == 0.0 || !nw.is_finite() {
            return Err(Error::Numerical("power iteration collapsed".into()));
        }
        v = w.into_iter().map(|z| z / nw).collect();
        if it >= 50 && (rq - lambda).abs() <= 1e-13 * rq.abs() {
            return Ok(rq);
        }
        lambda = rq;
    }
    Ok(lambda)
}

fn cholesky(m: &[Complex<f64>], r: usize) -> Option<Vec<Complex<f64>>> {
    let mut l = vec![Complex::new(0.0, 0.0); r * r];
    for j in 0..r {
        let mut d = m[j * r + j].re;
        for k in 0..j {
            d -= l[j * r + k].norm_sqr();
        }
        if d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        l[j * r + j] = Complex::new(d, 0.0);
        for i in j + 1..r {
            let mut s = m[i * r + j];
            for k in 0..j {
                s -= l[i * r + k] * l[j * r + k].conj();
            }
            l[i * r + j] = s / d;
        }
    }
    Some(l)
}

fn chol_solve(l: &[Complex<f64>], r: usize, b: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut y = b.to_vec();
    for i in 0..r {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * r + k] * y[k];
        }
        y[i] = s / l[i * r + i].re;
    }
    for i in (0..r).rev() {
        let mut s = y[i];
        for k in i + 1..r {
            s -= l[k * r + i].conj() * y[k];
        }
        y[i] = s / l[i * r + i].re;
    }
    y
}
