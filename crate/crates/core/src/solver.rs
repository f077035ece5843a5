//! Nonlinear evolution for `i u_t − Δ_± u = F(u)`: Strang splitting with an
//! exact linear flow and an explicit midpoint nonlinear substep, plus Picard
//! iteration of the Duhamel map `𝒯u = S(t)u₀ − i𝒜F(u)`.

use serde::{Deserialize, Serialize};

use crate::error::ensure;
use crate::fields::{ComplexField, Grid, Signature, SpaceTimeField};
use crate::freqdecomp::{zero_pad, truncate_spectrum, Decomposition, Partition};
use crate::propagator::{DuhamelStream, Propagator};
use crate::seminorms::{seminorm_trace, intersection_norm, SeminormId, SeminormTrace};
use crate::{Complex, Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityKind {
    /// `λ⃗·∇(|u|^{2κ}u)`
    PowerDerivative,
    /// `μ|u|^{2ν}u`
    Power,
    /// `2ū/(1+|u|²) Σ_j ε_j (∂_j u)²`
    SchrodingerMap,
}

impl std::str::FromStr for NonlinearityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power-derivative" => Ok(Self::PowerDerivative),
            "power" => Ok(Self::Power),
            "schrodinger-map" => Ok(Self::SchrodingerMap),
            _ => Err(Error::Parse(format!("unknown nonlinearity '{s}'"))),
        }
    }
}

/// Amplitude beyond which a run is declared to blow up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams<T: Real> {
    pub signature: Signature,
    pub kind: NonlinearityKind,
    pub lambda: Vec<Complex<T>>,
    pub kappa: u32,
    pub mu: Complex<T>,
    pub nu: u32,
    pub dt: T,
    pub t_end: T,
    /// padded grid has `⌈padding·N⌉` nodes per axis
    pub padding: f64,
    /// number of recorded slices in `evolve` (including `t = 0`)
    pub snapshots: usize,
}

impl<T: Real> SolverParams<T> {
    /// Linear flow only: every nonlinear coefficient zero.
    pub fn linear(signature: Signature, dt: T, t_end: T) -> Self {
        let n = signature.dim();
        Self {
            signature,
            kind: NonlinearityKind::Power,
            lambda: vec![Complex::new(T::zero(), T::zero()); n],
            kappa: 1,
            mu: Complex::new(T::zero(), T::zero()),
            nu: 1,
            dt,
            t_end,
            padding: 2.0,
            snapshots: 65,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Smallest padding that removes aliasing of the polynomial part.
    pub fn required_padding(&self) -> f64 {
        match self.kind {
            NonlinearityKind::PowerDerivative => (2 * self.kappa + 2) as f64 / 2.0,
            NonlinearityKind::Power => (2 * self.nu + 2) as f64 / 2.0,
            // the cubic numerator ū(∂u)²
            NonlinearityKind::SchrodingerMap => 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.dt > T::zero() && self.dt.is_finite(), "time step must be positive");
        ensure!(self.t_end >= T::zero(), "final time must be nonnegative");
        let n = (self.t_end / self.dt).as_f64();
        ensure!(
            (n - n.round()).abs() < 1e-9 * n.max(1.0),
            "final time {} is not a multiple of the step {}",
            self.t_end,
            self.dt
        );
        ensure!(self.kappa >= 1 && self.nu >= 1, "κ and ν must be at least 1");
        ensure!(
            self.lambda.len() == self.signature.dim(),
            "λ has {} components for a {}-d signature",
            self.lambda.len(),
            self.signature.dim()
        );
        ensure!(
            self.padding >= self.required_padding(),
            "dealias padding {} below the required {}",
            self.padding,
            self.required_padding()
        );
        ensure!(self.snapshots >= 2, "need at least two snapshots");
        Ok(())
    }

    fn is_linear(&self) -> bool {
        let zero = |z: &Complex<T>| z.re == T::zero() && z.im == T::zero();
        match self.kind {
            NonlinearityKind::PowerDerivative => self.lambda.iter().all(zero),
            NonlinearityKind::Power => zero(&self.mu),
            NonlinearityKind::SchrodingerMap => false,
        }
    }
}

/// Dealiased evaluation of `F` on one grid.
struct Nonlinearity<T: Real> {
    params: SolverParams<T>,
    grid: Grid<T>,
    padded: Grid<T>,
}

impl<T: Real> Nonlinearity<T> {
    fn new(grid: &Grid<T>, params: &SolverParams<T>) -> Result<Self> {
        params.validate()?;
        ensure!(
            grid.dim() == params.signature.dim(),
            "signature is {}-d but the grid is {}-d",
            params.signature.dim(),
            grid.dim()
        );
        let samples: Vec<usize> = grid
            .samples()
            .iter()
            .map(|&n| {
                let m = (params.padding * n as f64).ceil() as usize;
                m + m % 2
            })
            .collect();
        Ok(Self {
            params: params.clone(),
            grid: grid.clone(),
            padded: grid.resample(&samples)?,
        })
    }

    fn to_padded(&self, spec: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut v = zero_pad(&self.grid, &self.padded, spec);
        self.padded.idft(&mut v);
        v
    }

    fn from_padded(&self, mut v: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.padded.dft(&mut v);
        truncate_spectrum(&self.padded, &self.grid, &v)
    }

    /// `i ξ_j û`
    fn gradient(&self, spec: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let freqs = self.grid.freqs(axis);
        let strides = self.grid.strides();
        let n = self.grid.samples()[axis];
        spec.iter()
            .enumerate()
            .map(|(flat, &z)| {
                let m = (flat / strides[axis]) % n;
                z * Complex::new(T::zero(), freqs[m])
            })
            .collect()
    }

    /// Spectrum of `F(u)` from the spectrum of `u`.
    fn eval_dft(&self, spec: &[Complex<T>], time: T) -> Result<Vec<Complex<T>>> {
        let p = &self.params;
        let zero = Complex::new(T::zero(), T::zero());
        let u = self.to_padded(spec);
        let amax = u.iter().fold(T::zero(), |a, z| a.max(z.norm()));
        let bad = u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite());
        if bad || amax.as_f64() > BLOWUP_THRESHOLD {
            return Err(Error::BlowUp {
                time: time.as_f64(),
                max_amplitude: if bad { f64::INFINITY } else { amax.as_f64() },
            });
        }
        if p.is_linear() {
            return Ok(vec![zero; spec.len()]);
        }
        Ok(match p.kind {
            NonlinearityKind::Power => {
                let w = u.iter().map(|&z| z * p.mu * z.norm_sqr().powi(p.nu as i32)).collect();
                self.from_padded(w)
            }
            NonlinearityKind::PowerDerivative => {
                let w = u.iter().map(|&z| z * z.norm_sqr().powi(p.kappa as i32)).collect();
                let what = self.from_padded(w);
                let mut out = vec![zero; spec.len()];
                for (j, &lj) in p.lambda.iter().enumerate() {
                    if lj == zero {
                        continue;
                    }
                    for (o, g) in out.iter_mut().zip(self.gradient(&what, j)) {
                        *o = *o + lj * g;
                    }
                }
                out
            }
            NonlinearityKind::SchrodingerMap => {
                let mut acc = vec![zero; u.len()];
                for j in 0..self.grid.dim() {
                    let e = p.signature.get::<T>(j);
                    let d = self.to_padded(&self.gradient(spec, j));
                    for (a, z) in acc.iter_mut().zip(d) {
                        *a = *a + z * z * e;
                    }
                }
                let two = T::lit(2.0);
                let w = acc
                    .iter()
                    .zip(&u)
                    .map(|(&s, &z)| z.conj() * s * (two / (T::one() + z.norm_sqr())))
                    .collect();
                self.from_padded(w)
            }
        })
    }
}

/// `F(u)` sampled on `u`'s grid.
pub fn nonlinearity_eval<T: Real>(u: &ComplexField<T>, p: &SolverParams<T>) -> Result<ComplexField<T>> {
    let nl = Nonlinearity::new(u.grid(), p)?;
    Ok(ComplexField::from_dft(u.grid(), nl.eval_dft(&u.dft(), T::zero())?))
}

struct Stepper<T: Real> {
    nl: Nonlinearity<T>,
    prop: Propagator,
}

impl<T: Real> Stepper<T> {
    fn new(grid: &Grid<T>, p: &SolverParams<T>) -> Result<Self> {
        Ok(Self {
            nl: Nonlinearity::new(grid, p)?,
            prop: Propagator::new(p.signature.clone()),
        })
    }

    /// `S(Δt/2) ∘ N(Δt) ∘ S(Δt/2)` on spectra; `N` solves `u_t = −iF(u)` by
    /// the explicit midpoint rule.
    fn step(&self, spec: &mut Vec<Complex<T>>, time: T) -> Result<()> {
        let grid = &self.nl.grid;
        let dt = self.nl.params.dt;
        let half = dt * T::lit(0.5);
        self.prop.apply_dft(grid, spec, half);
        if !self.nl.params.is_linear() {
            let minus_i = Complex::new(T::zero(), -T::one());
            let f0 = self.nl.eval_dft(spec, time + half)?;
            let mid: Vec<Complex<T>> = spec
                .iter()
                .zip(&f0)
                .map(|(&u, &f)| u + minus_i * f * half)
                .collect();
            let f1 = self.nl.eval_dft(&mid, time + half)?;
            for (u, f) in spec.iter_mut().zip(f1) {
                *u = *u + minus_i * f * dt;
            }
        }
        self.prop.apply_dft(grid, spec, half);
        let bad = spec.iter().any(|z| !z.re.is_finite() || !z.im.is_finite());
        if bad {
            return Err(Error::BlowUp {
                time: (time + dt).as_f64(),
                max_amplitude: f64::INFINITY,
            });
        }
        Ok(())
    }
}

/// One Strang step of length `p.dt`.
pub fn strang_step<T: Real>(u: &ComplexField<T>, p: &SolverParams<T>) -> Result<ComplexField<T>> {
    let st = Stepper::new(u.grid(), p)?;
    let mut spec = u.dft();
    st.step(&mut spec, T::zero())?;
    Ok(ComplexField::from_dft(u.grid(), spec))
}

/// `u(T)` without recording the trajectory.
pub fn evolve_to<T: Real>(u0: &ComplexField<T>, p: &SolverParams<T>) -> Result<ComplexField<T>> {
    let st = Stepper::new(u0.grid(), p)?;
    let mut spec = u0.dft();
    for j in 0..p.steps() {
        st.step(&mut spec, T::of_usize(j) * p.dt)?;
    }
    Ok(ComplexField::from_dft(u0.grid(), spec))
}

/// Evolution recorded at `p.snapshots` evenly spaced times (the step count
/// must be a multiple of `snapshots − 1`), with the trace of `ids` over the
/// growing windows `[0, t_j]`.
pub fn evolve<T: Real>(
    u0: &ComplexField<T>,
    p: &SolverParams<T>,
    ids: &[SeminormId],
    part: &Partition<T>,
) -> Result<(SpaceTimeField<T>, SeminormTrace<T>)> {
    let st = Stepper::new(u0.grid(), p)?;
    let steps = p.steps();
    let every = steps / (p.snapshots - 1);
    ensure!(
        every >= 1 && every * (p.snapshots - 1) == steps,
        "{steps} steps cannot be recorded at {} evenly spaced snapshots",
        p.snapshots
    );
    let grid = u0.grid();
    let mut spec = u0.dft();
    let mut slices = vec![u0.clone()];
    for j in 0..steps {
        st.step(&mut spec, T::of_usize(j) * p.dt)?;
        if (j + 1) % every == 0 {
            slices.push(ComplexField::from_dft(grid, spec.clone()));
        }
    }
    let u = SpaceTimeField::new(T::zero(), p.dt * T::of_usize(every), slices)?;
    let trace = seminorm_trace(&u, ids, part)?;
    Ok((u, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace {
    /// `d(u_{m+1}, u_m)` for `m = 0, 1, …`
    pub distances: Vec<f64>,
    /// `d_{m+1}/d_m`
    pub ratios: Vec<f64>,
    /// first iterate index where the ratio exceeded 2 twice in a row
    pub diverged_at: Option<usize>,
}

/// `𝒯u = S(t)u₀ − i𝒜F(u)` on the slices of `window` (`times t_0 = 0, …`).
fn picard_map<T: Real>(
    free: &SpaceTimeField<T>,
    u: &SpaceTimeField<T>,
    nl: &Nonlinearity<T>,
    prop: &Propagator,
) -> Result<SpaceTimeField<T>> {
    let grid = u.grid();
    let mut stream = DuhamelStream::new(prop.clone(), grid, u.dt());
    let minus_i = Complex::new(T::zero(), -T::one());
    let mut out = Vec::with_capacity(u.len());
    for (j, s) in u.slices().iter().enumerate() {
        let f = nl.eval_dft(&s.dft(), u.time(j))?;
        let a = ComplexField::from_dft(grid, stream.push(f));
        let mut v = free.slice(j).clone();
        v.axpy(minus_i, &a);
        out.push(v);
    }
    SpaceTimeField::new(u.t0(), u.dt(), out)
}

/// Free flow `S(t)u₀` on `slices` times `0, Δt_w, …` spanning `[0, window]`.
pub fn free_evolution<T: Real>(
    u0: &ComplexField<T>,
    eps: &Signature,
    window: T,
    slices: usize,
) -> Result<SpaceTimeField<T>> {
    ensure!(slices >= 3, "need at least three time slices");
    let prop = Propagator::new(eps.clone());
    let dt = window / T::of_usize(slices - 1);
    SpaceTimeField::from_fn(T::zero(), dt, slices, |t| prop.propagate(u0, t).expect("checked grid"))
}

/// Iterates `u_0 = S(t)u₀`, `u_{m+1} = 𝒯u_m` on `[0, window]`, measuring
/// `d(u_{m+1}, u_m)` as the intersection norm of `ids`.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate<T: Real>(
    u0: &ComplexField<T>,
    p: &SolverParams<T>,
    n_iter: usize,
    window: T,
    slices: usize,
    ids: &[SeminormId],
    part: &Partition<T>,
) -> Result<PicardTrace> {
    ensure!(n_iter >= 3, "Picard iteration needs at least 3 iterates (got {n_iter})");
    let grid = u0.grid();
    let nl = Nonlinearity::new(grid, p)?;
    let prop = Propagator::new(p.signature.clone());
    let dec = Decomposition::new(grid, part)?;
    let free = free_evolution(u0, &p.signature, window, slices)?;
    let mut prev = free.clone();
    let mut distances = Vec::with_capacity(n_iter);
    let mut ratios = Vec::new();
    let mut diverged_at = None;
    let mut streak = 0;
    for m in 0..n_iter {
        let next = picard_map(&free, &prev, &nl, &prop)?;
        let d = intersection_norm(&next.sub(&prev), ids, &dec)?.as_f64();
        if let Some(&last) = distances.last() {
            let r = if last > 0.0 { d / last } else { 0.0 };
            ratios.push(r);
            streak = if r > 2.0 { streak + 1 } else { 0 };
            if streak >= 2 && diverged_at.is_none() {
                diverged_at = Some(m);
            }
        }
        distances.push(d);
        prev = next;
    }
    Ok(PicardTrace {
        distances,
        ratios,
        diverged_at,
    })
}

/// The Picard metric used by [`picard_iterate`] applied to `−i𝒜F(S(t)u₀)`.
pub fn first_picard_distance<T: Real>(
    u0: &ComplexField<T>,
    p: &SolverParams<T>,
    window: T,
    slices: usize,
    ids: &[SeminormId],
    part: &Partition<T>,
) -> Result<T> {
    let grid = u0.grid();
    let nl = Nonlinearity::new(grid, p)?;
    let free = free_evolution(u0, &p.signature, window, slices)?;
    let forcing = free.map_slices(|s| ComplexField::from_dft(grid, nl.eval_dft(&s.dft(), T::zero()).expect("small data")));
    let a = crate::propagator::duhamel(&forcing, &p.signature)?;
    intersection_norm(&a, ids, &Decomposition::new(grid, part)?)
}
