//! Periodic grids standing in for ℝⁿ, the continuum-normalised Fourier
//! transform, Fourier multipliers and mixed Lebesgue norms.
//!
//! Nodes are `x_j = -L + j Δx`, `Δx = 2L/N`; frequencies are `ξ_m = m π/L`
//! with `m ∈ {-N/2, …, N/2-1}`. The transform approximates
//! `f̂(ξ) = ∫ f(x) e^{-ixξ} dx`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rustfft::{Fft, FftPlanner};

use crate::error::ensure;
use crate::{Complex, Error, NeumaierSum, Real, Result};

struct Plans<T: Real> {
    fwd: Vec<Arc<dyn Fft<T>>>,
    inv: Vec<Arc<dyn Fft<T>>>,
    scratch: usize,
}

#[derive(Clone)]
pub struct Grid<T: Real> {
    half_extent: Vec<T>,
    samples: Vec<usize>,
    plans: Arc<OnceLock<Plans<T>>>,
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples && self.half_extent == other.half_extent
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_extent", &self.half_extent)
            .field("samples", &self.samples)
            .finish()
    }
}

/// Isotropic grid, `dim` copies of the same axis.
pub fn make_grid<T: Real>(dim: usize, half_extent: T, samples: usize) -> Result<Grid<T>> {
    ensure!((1..=3).contains(&dim), "grid dimension must be 1, 2 or 3 (got {dim})");
    Grid::new(&vec![half_extent; dim], &vec![samples; dim])
}

impl<T: Real> Grid<T> {
    pub fn new(half_extent: &[T], samples: &[usize]) -> Result<Self> {
        let dim = samples.len();
        ensure!((1..=3).contains(&dim), "grid dimension must be 1, 2 or 3 (got {dim})");
        ensure!(
            half_extent.len() == dim,
            "{} half extents for {} axes",
            half_extent.len(),
            dim
        );
        for (i, (&l, &n)) in half_extent.iter().zip(samples).enumerate() {
            ensure!(n % 2 == 0, "axis {i}: sample count {n} is odd");
            ensure!(n >= 16, "axis {i}: sample count {n} below 16");
            ensure!(l > T::zero() && l.is_finite(), "axis {i}: half extent {l} not positive");
        }
        Ok(Self {
            half_extent: half_extent.to_vec(),
            samples: samples.to_vec(),
            plans: Arc::new(OnceLock::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.samples.len()
    }
    pub fn samples(&self) -> &[usize] {
        &self.samples
    }
    pub fn half_extents(&self) -> &[T] {
        &self.half_extent
    }
    pub fn len(&self) -> usize {
        self.samples.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self, axis: usize) -> T {
        T::lit(2.0) * self.half_extent[axis] / T::of_usize(self.samples[axis])
    }
    pub fn dxi(&self, axis: usize) -> T {
        T::PI() / self.half_extent[axis]
    }
    /// Spatial cell volume `Π Δx_i`.
    pub fn cell(&self) -> T {
        (0..self.dim()).fold(T::one(), |a, i| a * self.dx(i))
    }
    pub fn x(&self, axis: usize, j: usize) -> T {
        -self.half_extent[axis] + T::of_usize(j) * self.dx(axis)
    }
    pub fn coords(&self, axis: usize) -> Vec<T> {
        (0..self.samples[axis]).map(|j| self.x(axis, j)).collect()
    }

    /// Signed mode number of raw DFT index `m`.
    pub fn mode(&self, axis: usize, m: usize) -> i64 {
        let n = self.samples[axis];
        if m < n / 2 {
            m as i64
        } else {
            m as i64 - n as i64
        }
    }
    /// Raw DFT index of signed mode number.
    pub fn raw_index(&self, axis: usize, mode: i64) -> usize {
        let n = self.samples[axis] as i64;
        mode.rem_euclid(n) as usize
    }
    /// Frequencies in raw DFT order.
    pub fn freqs(&self, axis: usize) -> Vec<T> {
        let d = self.dxi(axis);
        (0..self.samples[axis])
            .map(|m| T::of_i64(self.mode(axis, m)) * d)
            .collect()
    }
    /// Frequency of centered index `c` (`c = N/2` is ξ = 0).
    pub fn xi_centered(&self, axis: usize, c: usize) -> T {
        T::of_i64(c as i64 - (self.samples[axis] / 2) as i64) * self.dxi(axis)
    }
    /// Largest positive frequency node.
    pub fn max_xi(&self, axis: usize) -> T {
        T::of_usize(self.samples[axis] / 2 - 1) * self.dxi(axis)
    }
    /// Lattice radius usable on this axis, `⌊max ξ⌋ − 2`.
    pub fn k_max(&self, axis: usize) -> i64 {
        self.max_xi(axis).floor().as_f64() as i64 - 2
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for i in (0..self.dim().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.samples[i + 1];
        }
        s
    }
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = flat % self.samples[i];
            flat /= self.samples[i];
        }
        idx
    }

    /// Same box, different sample counts.
    pub fn resample(&self, samples: &[usize]) -> Result<Self> {
        Self::new(&self.half_extent, samples)
    }
    pub fn refined(&self) -> Result<Self> {
        let s: Vec<usize> = self.samples.iter().map(|n| 2 * n).collect();
        self.resample(&s)
    }

    fn plans(&self) -> &Plans<T> {
        self.plans.get_or_init(|| {
            let mut planner = FftPlanner::new();
            let fwd: Vec<_> = self.samples.iter().map(|&n| planner.plan_fft_forward(n)).collect();
            let inv: Vec<_> = self.samples.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
            let scratch = fwd
                .iter()
                .chain(inv.iter())
                .map(|p| p.get_inplace_scratch_len())
                .max()
                .unwrap_or(0);
            Plans { fwd, inv, scratch }
        })
    }

    /// Unnormalised n-dimensional DFT in raw order, in place.
    pub fn dft(&self, data: &mut [Complex<T>]) {
        self.transform(data, false);
    }

    /// Inverse of [`Grid::dft`] (normalised by `1/len`), in place.
    pub fn idft(&self, data: &mut [Complex<T>]) {
        self.transform(data, true);
        let s = T::one() / T::of_usize(self.len());
        for z in data.iter_mut() {
            *z = *z * s;
        }
    }

    fn transform(&self, data: &mut [Complex<T>], inverse: bool) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let plans = self.plans();
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plans.scratch];
        let strides = self.strides();
        let mut lane_buf = Vec::new();
        for axis in 0..self.dim() {
            let fft = if inverse { &plans.inv[axis] } else { &plans.fwd[axis] };
            let n = self.samples[axis];
            let stride = strides[axis];
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            lane_buf.resize(n * stride, Complex::new(T::zero(), T::zero()));
            for block in data.chunks_mut(n * stride) {
                for j in 0..n {
                    for s in 0..stride {
                        lane_buf[s * n + j] = block[j * stride + s];
                    }
                }
                fft.process_with_scratch(&mut lane_buf, &mut scratch);
                for j in 0..n {
                    for s in 0..stride {
                        block[j * stride + s] = lane_buf[s * n + j];
                    }
                }
            }
        }
    }

    /// Multiply `data` (raw DFT order) by `Π_i factors[i][m_i]`.
    pub fn apply_separable(&self, data: &mut [Complex<T>], factors: &[Vec<Complex<T>>]) {
        assert_eq!(factors.len(), self.dim());
        fn rec<T: Real>(
            data: &mut [Complex<T>],
            factors: &[Vec<Complex<T>>],
            acc: Complex<T>,
        ) {
            let f = &factors[0];
            if factors.len() == 1 {
                for (z, w) in data.iter_mut().zip(f) {
                    *z = *z * (acc * *w);
                }
                return;
            }
            let chunk = data.len() / f.len();
            for (block, w) in data.chunks_mut(chunk).zip(f) {
                rec(block, &factors[1..], acc * *w);
            }
        }
        rec(data, factors, Complex::new(T::one(), T::zero()));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField<T: Real> {
    grid: Grid<T>,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexField<T> {
    pub fn new(grid: &Grid<T>, data: Vec<Complex<T>>) -> Result<Self> {
        ensure!(
            data.len() == grid.len(),
            "{} samples for a grid of {} nodes",
            data.len(),
            grid.len()
        );
        ensure!(
            data.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            "non-finite sample"
        );
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    /// Unchecked constructor for internal pipelines whose output is finite by construction.
    pub(crate) fn raw(grid: &Grid<T>, data: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::raw(grid, vec![Complex::new(T::zero(), T::zero()); grid.len()])
    }

    /// Sample `f` at every node; `f` receives the coordinates.
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut(&[T]) -> Complex<T>) -> Self {
        let coords: Vec<Vec<T>> = (0..grid.dim()).map(|i| grid.coords(i)).collect();
        let mut x = vec![T::zero(); grid.dim()];
        let data = (0..grid.len())
            .map(|flat| {
                let idx = grid.unravel(flat);
                for i in 0..grid.dim() {
                    x[i] = coords[i][idx[i]];
                }
                f(&x)
            })
            .collect();
        Self::raw(grid, data)
    }

    /// Build from raw DFT coefficients (inverse transform).
    pub fn from_dft(grid: &Grid<T>, mut spec: Vec<Complex<T>>) -> Self {
        grid.idft(&mut spec);
        Self::raw(grid, spec)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }
    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    /// Raw unnormalised DFT of the samples.
    pub fn dft(&self) -> Vec<Complex<T>> {
        let mut d = self.data.clone();
        self.grid.dft(&mut d);
        d
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self::raw(&self.grid, self.data.iter().map(|&z| f(z)).collect())
    }
    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }
    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|z| z * c)
    }
    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert!(self.grid == other.grid, "fields on different grids");
        Self::raw(
            &self.grid,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }
    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }
    /// `self += c·other`
    pub fn axpy(&mut self, c: Complex<T>, other: &Self) {
        assert!(self.grid == other.grid, "fields on different grids");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + c * b;
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == T::zero() && z.im == T::zero())
    }

    /// Continuum `L^p` norm by Riemann sum; `p = ∞` is the node maximum.
    pub fn lp_norm(&self, p: f64) -> T {
        if p.is_infinite() {
            return self.max_abs();
        }
        let mut acc = NeumaierSum::new();
        for z in &self.data {
            acc.add(pow_abs(*z, p));
        }
        (acc.value() * self.grid.cell()).powf(T::lit(1.0 / p))
    }
    pub fn l2_norm(&self) -> T {
        self.lp_norm(2.0)
    }

    /// `∫ f ḡ dx`
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert!(self.grid == other.grid, "fields on different grids");
        let (mut re, mut im) = (NeumaierSum::new(), NeumaierSum::new());
        for (a, b) in self.data.iter().zip(&other.data) {
            let z = *a * b.conj();
            re.add(z.re);
            im.add(z.im);
        }
        Complex::new(re.value(), im.value()) * self.grid.cell()
    }

    /// Relative L² distance `‖self − other‖/‖other‖` (absolute when `other = 0`).
    pub fn rel_l2_diff(&self, other: &Self) -> T {
        let d = self.sub(other).l2_norm();
        let n = other.l2_norm();
        if n > T::zero() {
            d / n
        } else {
            d
        }
    }
}

/// `|z|^p` with the common exponents special-cased.
#[inline]
pub(crate) fn pow_abs<T: Real>(z: Complex<T>, p: f64) -> T {
    if p == 2.0 {
        z.norm_sqr()
    } else if p == 1.0 {
        z.norm()
    } else if p == 4.0 {
        let s = z.norm_sqr();
        s * s
    } else {
        z.norm_sqr().powf(T::lit(p / 2.0))
    }
}

/// Continuum Fourier transform sampled at the frequency nodes, in centered
/// order (centered index `c` ↔ `ξ = (c − N/2)Δξ`).
pub fn fourier_forward<T: Real>(f: &ComplexField<T>) -> ComplexField<T> {
    let grid = f.grid();
    let mut d = f.dft();
    // continuum phase: e^{iLξ_m} = (-1)^m, and the Δx^n measure
    let factors: Vec<Vec<Complex<T>>> = (0..grid.dim())
        .map(|i| {
            let dx = grid.dx(i);
            (0..grid.samples()[i])
                .map(|m| {
                    let s = if grid.mode(i, m).rem_euclid(2) == 0 { dx } else { -dx };
                    Complex::new(s, T::zero())
                })
                .collect()
        })
        .collect();
    grid.apply_separable(&mut d, &factors);
    ComplexField::raw(grid, reorder(grid, &d, true))
}

pub fn fourier_inverse<T: Real>(fhat: &ComplexField<T>) -> ComplexField<T> {
    let grid = fhat.grid();
    let mut d = reorder(grid, fhat.data(), false);
    let factors: Vec<Vec<Complex<T>>> = (0..grid.dim())
        .map(|i| {
            let inv = T::one() / grid.dx(i);
            (0..grid.samples()[i])
                .map(|m| {
                    let s = if grid.mode(i, m).rem_euclid(2) == 0 { inv } else { -inv };
                    Complex::new(s, T::zero())
                })
                .collect()
        })
        .collect();
    grid.apply_separable(&mut d, &factors);
    ComplexField::from_dft(grid, d)
}

/// Raw ↔ centered ordering (a half-length cyclic shift on every axis).
fn reorder<T: Real>(grid: &Grid<T>, src: &[Complex<T>], to_centered: bool) -> Vec<Complex<T>> {
    let strides = grid.strides();
    let mut out = vec![Complex::new(T::zero(), T::zero()); src.len()];
    for (flat, &z) in src.iter().enumerate() {
        let idx = grid.unravel(flat);
        let mut t = 0;
        for i in 0..grid.dim() {
            let n = grid.samples()[i];
            let j = if to_centered { (idx[i] + n / 2) % n } else { (idx[i] + n - n / 2) % n };
            t += j * strides[i];
        }
        out[t] = z;
    }
    out
}

/// Apply a multiplier given as a function of the frequency vector.
pub fn apply_multiplier<T: Real>(
    f: &ComplexField<T>,
    m: impl Fn(&[T]) -> Complex<T>,
) -> ComplexField<T> {
    let grid = f.grid();
    let freqs: Vec<Vec<T>> = (0..grid.dim()).map(|i| grid.freqs(i)).collect();
    let mut d = f.dft();
    let mut xi = vec![T::zero(); grid.dim()];
    for (flat, z) in d.iter_mut().enumerate() {
        let idx = grid.unravel(flat);
        for i in 0..grid.dim() {
            xi[i] = freqs[i][idx[i]];
        }
        *z = *z * m(&xi);
    }
    ComplexField::from_dft(grid, d)
}

/// `D^s_{x_i} = F⁻¹|ξ_i|^s F`.
pub fn fractional_derivative<T: Real>(
    f: &ComplexField<T>,
    axis: usize,
    s: T,
) -> Result<ComplexField<T>> {
    let grid = f.grid();
    ensure!(axis < grid.dim(), "axis {axis} out of range for a {}-d grid", grid.dim());
    ensure!(s >= T::zero(), "negative derivative order {s}");
    if s == T::zero() {
        return Ok(f.clone());
    }
    let factors = axis_factor(grid, axis, |xi| Complex::new(xi.abs().powf(s), T::zero()));
    let mut d = f.dft();
    grid.apply_separable(&mut d, &factors);
    Ok(ComplexField::from_dft(grid, d))
}

/// Spectral `∂_{x_i}`; the Nyquist mode is dropped so real data stay real.
pub fn derivative<T: Real>(f: &ComplexField<T>, axis: usize) -> Result<ComplexField<T>> {
    let grid = f.grid();
    ensure!(axis < grid.dim(), "axis {axis} out of range for a {}-d grid", grid.dim());
    let mut d = f.dft();
    grid.apply_separable(&mut d, &derivative_factors(grid, axis));
    Ok(ComplexField::from_dft(grid, d))
}

pub(crate) fn derivative_factors<T: Real>(grid: &Grid<T>, axis: usize) -> Vec<Vec<Complex<T>>> {
    let n = grid.samples()[axis];
    let mut f = axis_factor(grid, axis, |xi| Complex::new(T::zero(), xi));
    f[axis][n / 2] = Complex::new(T::zero(), T::zero());
    f
}

/// Per-axis factor list that is `g(ξ_axis)` on one axis and 1 elsewhere.
pub(crate) fn axis_factor<T: Real>(
    grid: &Grid<T>,
    axis: usize,
    g: impl Fn(T) -> Complex<T>,
) -> Vec<Vec<Complex<T>>> {
    (0..grid.dim())
        .map(|i| {
            if i == axis {
                grid.freqs(i).into_iter().map(&g).collect()
            } else {
                vec![Complex::new(T::one(), T::zero()); grid.samples()[i]]
            }
        })
        .collect()
}

/// Sign pattern `ε` of `|ξ|²_± = Σ ε_j ξ_j²`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    eps: Vec<i8>,
}

impl Signature {
    pub fn new(eps: &[i8]) -> Result<Self> {
        ensure!(
            !eps.is_empty() && eps.len() <= 3,
            "signature length {} not in 1..=3",
            eps.len()
        );
        ensure!(eps.iter().all(|&e| e == 1 || e == -1), "signature entries must be ±1");
        Ok(Self { eps: eps.to_vec() })
    }
    pub fn elliptic(dim: usize) -> Self {
        Self { eps: vec![1; dim] }
    }
    /// `(+1, −1, −1, …)`
    pub fn hyperbolic(dim: usize) -> Self {
        let mut eps = vec![-1; dim];
        eps[0] = 1;
        Self { eps }
    }
    pub fn dim(&self) -> usize {
        self.eps.len()
    }
    pub fn eps(&self) -> &[i8] {
        &self.eps
    }
    pub fn get<T: Real>(&self, j: usize) -> T {
        T::lit(self.eps[j] as f64)
    }
    pub fn negated(&self) -> Self {
        Self {
            eps: self.eps.iter().map(|e| -e).collect(),
        }
    }
    /// `Σ ε_j ξ_j²`
    pub fn quad<T: Real>(&self, xi: &[T]) -> T {
        xi.iter()
            .zip(&self.eps)
            .fold(T::zero(), |a, (&x, &e)| a + T::lit(e as f64) * x * x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField<T: Real> {
    grid: Grid<T>,
    t0: T,
    dt: T,
    slices: Vec<ComplexField<T>>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn new(t0: T, dt: T, slices: Vec<ComplexField<T>>) -> Result<Self> {
        ensure!(!slices.is_empty(), "space-time field needs at least one slice");
        ensure!(dt > T::zero() && dt.is_finite(), "time step {dt} not positive");
        let grid = slices[0].grid().clone();
        ensure!(
            slices.iter().all(|s| *s.grid() == grid),
            "slices live on different grids"
        );
        Ok(Self { grid, t0, dt, slices })
    }

    /// `J+1` slices at `t_0 + jΔt` sampled from `f(t)`.
    pub fn from_fn(
        t0: T,
        dt: T,
        count: usize,
        mut f: impl FnMut(T) -> ComplexField<T>,
    ) -> Result<Self> {
        let slices = (0..count).map(|j| f(t0 + T::of_usize(j) * dt)).collect();
        Self::new(t0, dt, slices)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn t0(&self) -> T {
        self.t0
    }
    pub fn dt(&self) -> T {
        self.dt
    }
    pub fn len(&self) -> usize {
        self.slices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
    pub fn time(&self, j: usize) -> T {
        self.t0 + T::of_usize(j) * self.dt
    }
    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }
    /// `t_J − t_0`
    pub fn span(&self) -> T {
        T::of_usize(self.len() - 1) * self.dt
    }
    pub fn slices(&self) -> &[ComplexField<T>] {
        &self.slices
    }
    pub fn slice(&self, j: usize) -> &ComplexField<T> {
        &self.slices[j]
    }
    pub fn into_slices(self) -> Vec<ComplexField<T>> {
        self.slices
    }
    pub fn map_slices(&self, f: impl Fn(&ComplexField<T>) -> ComplexField<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            t0: self.t0,
            dt: self.dt,
            slices: self.slices.iter().map(f).collect(),
        }
    }
    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map_slices(|s| s.scale(c))
    }
    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&ComplexField<T>, &ComplexField<T>) -> ComplexField<T>,
    ) -> Self {
        assert_eq!(self.len(), other.len(), "slice counts differ");
        Self {
            grid: self.grid.clone(),
            t0: self.t0,
            dt: self.dt,
            slices: self.slices.iter().zip(&other.slices).map(|(a, b)| f(a, b)).collect(),
        }
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.sub(b))
    }
    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.add(b))
    }
    /// First `count` slices.
    pub fn truncated(&self, count: usize) -> Self {
        Self {
            grid: self.grid.clone(),
            t0: self.t0,
            dt: self.dt,
            slices: self.slices[..count].to_vec(),
        }
    }
}

/// A mixed Lebesgue norm on space-time. Exponents are in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MixedNorm {
    /// `L^{outer}_{x_axis} L^{inner}_{(x_j)_{j≠axis}, t}`
    Anisotropic { axis: usize, outer: f64, inner: f64 },
    /// `L^{time}_t L^{space}_x`
    TimeOuter { space: f64, time: f64 },
}

impl MixedNorm {
    /// `L^p_{x,t}`
    pub fn full(p: f64) -> Self {
        MixedNorm::TimeOuter { space: p, time: p }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let (a, b) = match *self {
            MixedNorm::Anisotropic { axis, outer, inner } => {
                ensure!(axis < dim, "norm axis {axis} out of range for a {dim}-d grid");
                (outer, inner)
            }
            MixedNorm::TimeOuter { space, time } => (space, time),
        };
        ensure!(a >= 1.0 && b >= 1.0, "Lebesgue exponents must lie in [1, ∞]");
        Ok(())
    }
}

impl fmt::Display for MixedNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = |p: f64| if p.is_infinite() { "inf".to_string() } else { format!("{p}") };
        match *self {
            MixedNorm::Anisotropic { axis, outer, inner } => {
                write!(f, "L^{}_x{} L^{}", e(outer), axis + 1, e(inner))
            }
            MixedNorm::TimeOuter { space, time } => write!(f, "L^{}_t L^{}_x", e(time), e(space)),
        }
    }
}

/// Streaming evaluation of a [`MixedNorm`]: slices are pushed in time order
/// and [`MixedNormAcc::value`] gives the norm over the window seen so far.
/// Time integrals are left-endpoint sums, so the newest slice only enters
/// through maxima until its successor arrives.
#[derive(Clone, Debug)]
pub struct MixedNormAcc<T: Real> {
    norm: MixedNorm,
    samples: Vec<usize>,
    strides: Vec<usize>,
    dx: Vec<T>,
    cell: T,
    dt: T,
    totals: Vec<NeumaierSum<T>>,
    maxima: Vec<T>,
    pending: Option<Vec<T>>,
    pushed: usize,
}

impl<T: Real> MixedNormAcc<T> {
    pub fn new(norm: MixedNorm, grid: &Grid<T>, dt: T) -> Result<Self> {
        norm.validate(grid.dim())?;
        let outer = match norm {
            MixedNorm::Anisotropic { axis, .. } => grid.samples()[axis],
            MixedNorm::TimeOuter { .. } => 1,
        };
        Ok(Self {
            norm,
            samples: grid.samples().to_vec(),
            strides: grid.strides(),
            dx: (0..grid.dim()).map(|i| grid.dx(i)).collect(),
            cell: grid.cell(),
            dt,
            totals: vec![NeumaierSum::new(); outer],
            maxima: vec![T::zero(); outer],
            pending: None,
            pushed: 0,
        })
    }

    pub fn norm(&self) -> MixedNorm {
        self.norm
    }
    pub fn pushed(&self) -> usize {
        self.pushed
    }

    pub fn push(&mut self, slice: &[Complex<T>]) {
        assert_eq!(slice.len(), self.strides[0] * self.samples[0]);
        match self.norm {
            MixedNorm::Anisotropic { axis, inner, .. } => {
                let n = self.samples[axis];
                let stride = self.strides[axis];
                if inner.is_infinite() {
                    for block in slice.chunks(n * stride) {
                        for (a, lane) in block.chunks(stride).enumerate() {
                            let m = lane.iter().fold(T::zero(), |m, z| m.max(z.norm()));
                            self.maxima[a] = self.maxima[a].max(m);
                        }
                    }
                } else {
                    let mut part = vec![NeumaierSum::new(); n];
                    for block in slice.chunks(n * stride) {
                        for (a, lane) in block.chunks(stride).enumerate() {
                            for z in lane {
                                part[a].add(pow_abs(*z, inner));
                            }
                        }
                    }
                    let w = self.cell / self.dx[axis];
                    let contrib: Vec<T> = part.iter().map(|s| s.value() * w).collect();
                    self.settle_pending(contrib);
                }
            }
            MixedNorm::TimeOuter { space, time } => {
                // `raw` is ‖u(t)‖_p^p, kept unrooted when the exponents agree
                let (s, raw) = if space.is_infinite() {
                    let m = slice.iter().fold(T::zero(), |m, z| m.max(z.norm()));
                    (m, None)
                } else {
                    let mut acc = NeumaierSum::new();
                    for z in slice {
                        acc.add(pow_abs(*z, space));
                    }
                    let raw = acc.value() * self.cell;
                    (raw.powf(T::lit(1.0 / space)), Some(raw))
                };
                if time.is_infinite() {
                    self.maxima[0] = self.maxima[0].max(s);
                } else {
                    let c = match raw {
                        Some(r) if time == space => r,
                        _ => pow_abs(Complex::new(s, T::zero()), time),
                    };
                    self.settle_pending(vec![c]);
                }
            }
        }
        self.pushed += 1;
    }

    fn settle_pending(&mut self, contrib: Vec<T>) {
        if let Some(prev) = self.pending.take() {
            for (t, c) in self.totals.iter_mut().zip(prev) {
                t.add(c * self.dt);
            }
        }
        self.pending = Some(contrib);
    }

    pub fn value(&self) -> T {
        match self.norm {
            MixedNorm::Anisotropic { axis, outer, inner } => {
                let inner_vals: Vec<T> = if inner.is_infinite() {
                    self.maxima.clone()
                } else {
                    let e = T::lit(1.0 / inner);
                    self.totals.iter().map(|t| t.value().max(T::zero()).powf(e)).collect()
                };
                if outer.is_infinite() {
                    inner_vals.into_iter().fold(T::zero(), T::max)
                } else {
                    let mut acc = NeumaierSum::new();
                    for v in inner_vals {
                        acc.add(pow_abs(Complex::new(v, T::zero()), outer));
                    }
                    (acc.value() * self.dx[axis]).powf(T::lit(1.0 / outer))
                }
            }
            MixedNorm::TimeOuter { time, .. } => {
                if time.is_infinite() {
                    self.maxima[0]
                } else {
                    self.totals[0].value().max(T::zero()).powf(T::lit(1.0 / time))
                }
            }
        }
    }
}

/// The mixed norm of a whole space-time field.
pub fn mixed_norm<T: Real>(u: &SpaceTimeField<T>, norm: MixedNorm) -> Result<T> {
    ensure!(u.len() >= 2, "space-time norm needs at least two time slices");
    let mut acc = MixedNormAcc::new(norm, u.grid(), u.dt())?;
    for s in u.slices() {
        acc.push(s.data());
    }
    Ok(acc.value())
}

/// `‖u‖_{L^{p_outer}_{x_i} L^{p_inner}_{(x_j)_{j≠i}, t}}`
pub fn anisotropic_norm<T: Real>(
    u: &SpaceTimeField<T>,
    outer_axis: usize,
    p_outer: f64,
    p_inner: f64,
) -> Result<T> {
    mixed_norm(
        u,
        MixedNorm::Anisotropic {
            axis: outer_axis,
            outer: p_outer,
            inner: p_inner,
        },
    )
}

pub(crate) fn check_grid<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<()> {
    if a != b {
        return Err(Error::Validation("fields live on different grids".into()));
    }
    Ok(())
}
