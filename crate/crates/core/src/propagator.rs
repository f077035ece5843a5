//! Free flow `S(t)` for a signature `ε`, as a Fourier multiplier and through
//! transported Gaussian atoms, and the Duhamel integral `𝒜`.

use serde::{Deserialize, Serialize};

use crate::error::ensure;
use crate::fields::{ComplexField, Grid, Signature, SpaceTimeField};
use crate::gabor::FrameCoefficients;
use crate::{Complex, Error, Real, Result};

/// `Plus`: `S(t) = F⁻¹ e^{+it|ξ|²_±} F`, under which the atom formula holds as
/// written and `u = S(t)u₀` solves `i u_t + Δ_± u = 0`. `Minus` flips both
/// realisations together.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    #[default]
    Plus,
    Minus,
}

impl SignConvention {
    pub fn sign<T: Real>(self) -> T {
        match self {
            SignConvention::Plus => T::one(),
            SignConvention::Minus => -T::one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    eps: Signature,
    convention: SignConvention,
}

/// Transported atoms must stay this far from the box faces.
pub const ATOM_MARGIN: f64 = 6.0;

impl Propagator {
    pub fn new(eps: Signature) -> Self {
        Self {
            eps,
            convention: SignConvention::Plus,
        }
    }
    pub fn with_convention(eps: Signature, convention: SignConvention) -> Self {
        Self { eps, convention }
    }
    pub fn signature(&self) -> &Signature {
        &self.eps
    }
    pub fn convention(&self) -> SignConvention {
        self.convention
    }

    /// Effective per-axis time `σ ε_j t`.
    fn axis_time<T: Real>(&self, j: usize, t: T) -> T {
        self.convention.sign::<T>() * self.eps.get::<T>(j) * t
    }

    /// Separable factors of `e^{iσt|ξ|²_±}` in raw DFT order.
    pub fn phase_factors<T: Real>(&self, grid: &Grid<T>, t: T) -> Vec<Vec<Complex<T>>> {
        (0..grid.dim())
            .map(|j| {
                let tau = self.axis_time(j, t);
                grid.freqs(j)
                    .into_iter()
                    .map(|x| Complex::from_polar(T::one(), tau * x * x))
                    .collect()
            })
            .collect()
    }

    fn check_dim<T: Real>(&self, grid: &Grid<T>) -> Result<()> {
        ensure!(
            grid.dim() == self.eps.dim(),
            "signature of length {} on a {}-d grid",
            self.eps.dim(),
            grid.dim()
        );
        Ok(())
    }

    /// Propagate a raw spectrum in place.
    pub fn apply_dft<T: Real>(&self, grid: &Grid<T>, spec: &mut [Complex<T>], t: T) {
        if t == T::zero() {
            return;
        }
        grid.apply_separable(spec, &self.phase_factors(grid, t));
    }

    pub fn propagate<T: Real>(&self, f: &ComplexField<T>, t: T) -> Result<ComplexField<T>> {
        self.check_dim(f.grid())?;
        if t == T::zero() {
            return Ok(f.clone());
        }
        let mut d = f.dft();
        self.apply_dft(f.grid(), &mut d, t);
        Ok(ComplexField::from_dft(f.grid(), d))
    }

    /// Closed-form `S(t)` of the atom `e^{ik·x}e^{−|x−l|²/2}`, summed over the
    /// periodic images that contribute above double precision.
    pub fn atom<T: Real>(&self, k: &[i64], l: &[i64], t: T, grid: &Grid<T>) -> Result<ComplexField<T>> {
        self.check_dim(grid)?;
        let n = grid.dim();
        ensure!(k.len() == n && l.len() == n, "atom indices must have length {n}");
        let factors = (0..n)
            .map(|j| self.atom_axis(k[j], l[j], t, grid, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(tensor(grid, &factors))
    }

    fn atom_axis<T: Real>(&self, k: i64, l: i64, t: T, grid: &Grid<T>, j: usize) -> Result<Vec<Complex<T>>> {
        let tau = self.axis_time(j, t).as_f64();
        let half = grid.half_extents()[j].as_f64();
        let kf = k as f64;
        let center = l as f64 - 2.0 * tau * kf;
        if center.abs() > half - ATOM_MARGIN {
            return Err(Error::Validation(format!(
                "transported atom centre {center:.3} on axis {j} leaves the box interior (|x| ≤ {:.3})",
                half - ATOM_MARGIN
            )));
        }
        let a = Complex::new(1.0, -2.0 * tau);
        let inv = 1.0 / (2.0 * a);
        let amp = a.sqrt().inv() * Complex::from_polar(1.0, tau * kf * kf);
        // images within ~40 e-folds of the spread Gaussian
        let reach = (80.0 * (1.0 + 4.0 * tau * tau)).sqrt();
        let m_max = ((reach + 2.0 * half) / (2.0 * half)).ceil() as i64;
        Ok((0..grid.samples()[j])
            .map(|i| {
                let x = grid.x(j, i).as_f64();
                let mut acc = Complex::new(0.0, 0.0);
                for m in -m_max..=m_max {
                    let xm = x + 2.0 * half * m as f64;
                    let d = xm - center;
                    if d.abs() > reach {
                        continue;
                    }
                    acc += Complex::from_polar(1.0, kf * xm) * (-(d * d) * inv).exp();
                }
                let z = amp * acc;
                Complex::new(T::lit(z.re), T::lit(z.im))
            })
            .collect())
    }

    pub fn propagate_gabor<T: Real>(
        &self,
        c: &FrameCoefficients<T>,
        t: T,
        grid: &Grid<T>,
    ) -> Result<ComplexField<T>> {
        self.check_dim(grid)?;
        ensure!(c.dim() == grid.dim(), "coefficients and grid differ in dimension");
        let mut out = ComplexField::zeros(grid);
        for (k, l, v) in c.iter() {
            if v.re == T::zero() && v.im == T::zero() {
                continue;
            }
            let a = self.atom(&k, &l, t, grid)?;
            out.axpy(v, &a);
        }
        Ok(out)
    }

    /// `(𝒜F)(t_j) = ∫_{t_0}^{t_j} S(t_j − τ) F(τ) dτ` by the trapezoid rule in
    /// the interaction picture.
    pub fn duhamel<T: Real>(&self, f: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        self.check_dim(f.grid())?;
        ensure!(f.len() >= 3, "Duhamel quadrature needs at least three slices");
        let grid = f.grid();
        let mut stream = DuhamelStream::new(self.clone(), grid, f.dt());
        let slices = f
            .slices()
            .iter()
            .map(|s| ComplexField::from_dft(grid, stream.push(s.dft())))
            .collect();
        SpaceTimeField::new(f.t0(), f.dt(), slices)
    }
}

/// Sequential Duhamel integration over raw spectra: feed `F̂(t_j)` in order,
/// receive the spectrum of `(𝒜F)(t_j)`.
pub struct DuhamelStream<T: Real> {
    prop: Propagator,
    grid: Grid<T>,
    dt: T,
    acc: Vec<Complex<T>>,
    prev: Option<Vec<Complex<T>>>,
    step: usize,
}

impl<T: Real> DuhamelStream<T> {
    pub fn new(prop: Propagator, grid: &Grid<T>, dt: T) -> Self {
        Self {
            prop,
            grid: grid.clone(),
            dt,
            acc: vec![Complex::new(T::zero(), T::zero()); grid.len()],
            prev: None,
            step: 0,
        }
    }

    pub fn push(&mut self, mut fhat: Vec<Complex<T>>) -> Vec<Complex<T>> {
        let tau = T::of_usize(self.step) * self.dt;
        // G = S(−τ)F
        self.prop.apply_dft(&self.grid, &mut fhat, -tau);
        if let Some(prev) = self.prev.take() {
            let h = self.dt * T::lit(0.5);
            for ((a, p), g) in self.acc.iter_mut().zip(&prev).zip(&fhat) {
                *a = *a + (*p + *g) * h;
            }
        }
        let mut out = self.acc.clone();
        self.prop.apply_dft(&self.grid, &mut out, tau);
        self.prev = Some(fhat);
        self.step += 1;
        out
    }
}

fn tensor<T: Real>(grid: &Grid<T>, factors: &[Vec<Complex<T>>]) -> ComplexField<T> {
    let mut data = vec![Complex::new(T::one(), T::zero()); grid.len()];
    grid.apply_separable(&mut data, factors);
    ComplexField::raw(grid, data)
}

pub fn propagate_spectral<T: Real>(f: &ComplexField<T>, t: T, eps: &Signature) -> Result<ComplexField<T>> {
    Propagator::new(eps.clone()).propagate(f, t)
}

pub fn atom_evolution<T: Real>(
    k: &[i64],
    l: &[i64],
    t: T,
    eps: &Signature,
    grid: &Grid<T>,
) -> Result<ComplexField<T>> {
    Propagator::new(eps.clone()).atom(k, l, t, grid)
}

pub fn propagate_gabor<T: Real>(
    c: &FrameCoefficients<T>,
    t: T,
    eps: &Signature,
    grid: &Grid<T>,
) -> Result<ComplexField<T>> {
    Propagator::new(eps.clone()).propagate_gabor(c, t, grid)
}

pub fn duhamel<T: Real>(f: &SpaceTimeField<T>, eps: &Signature) -> Result<SpaceTimeField<T>> {
    Propagator::new(eps.clone()).duhamel(f)
}
