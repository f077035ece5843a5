//! Frequency-uniform decomposition `□_k = F⁻¹σ_k F` and modulation norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ensure;
use crate::fields::{pow_abs, ComplexField, Grid};
use crate::{Complex, Error, NeumaierSum, Real, Result};

/// The unit window `η`. `ψ(ξ) = exp(−1/(1−ξ²))` on `(−1, 1)` and
/// `η = ψ / Σ_j ψ(· − j)`, so the integer translates of `η` sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition<T: Real> {
    record: &'static str,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> Default for Partition<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub fn build_partition<T: Real>() -> Partition<T> {
    Partition::new()
}

fn psi<T: Real>(x: T) -> T {
    let one = T::one();
    if x.abs() >= one {
        T::zero()
    } else {
        (-(one / (one - x * x))).exp()
    }
}

impl<T: Real> Partition<T> {
    pub fn new() -> Self {
        Self {
            record: "psi(x) = exp(-1/(1-x^2)) on (-1,1); eta = psi / sum_j psi(. - j)",
            _t: std::marker::PhantomData,
        }
    }

    pub fn record(&self) -> &'static str {
        self.record
    }

    /// `η(ξ)`; evaluated on `|ξ|` so evenness is exact in floating point.
    pub fn eta(&self, xi: T) -> T {
        let a = xi.abs();
        if a >= T::one() {
            return T::zero();
        }
        // on [0,1) the normalising sum has exactly two live terms
        let p = psi(a);
        p / (p + psi(a - T::one()))
    }

    /// `σ_k(ξ) = Π_j η(ξ_j − k_j)`
    pub fn sigma(&self, k: &[i64], xi: &[T]) -> T {
        k.iter()
            .zip(xi)
            .fold(T::one(), |acc, (&kj, &x)| acc * self.eta(x - T::of_i64(kj)))
    }
}

/// `(s, p, q)` of `M^s_{p,q}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub s: f64,
    #[serde(with = "crate::io::exponent")]
    pub p: f64,
    #[serde(with = "crate::io::exponent")]
    pub q: f64,
}

impl NormSpec {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        let n = Self { s, p, q };
        n.validate()?;
        Ok(n)
    }
    pub fn validate(&self) -> Result<()> {
        ensure!(self.s.is_finite(), "regularity s must be finite");
        ensure!(self.p >= 1.0, "exponent p = {} outside [1, ∞]", self.p);
        ensure!(self.q >= 1.0, "exponent q = {} outside [1, ∞]", self.q);
        Ok(())
    }
}

/// `⟨k⟩ = (1 + |k|²)^{1/2}`
pub fn bracket(k: &[i64]) -> f64 {
    (1.0 + k.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt()
}

/// Window samples of one axis: for each lattice coordinate, the raw DFT
/// indices where `η(ξ − k_j) ≠ 0` with their weights.
#[derive(Clone, Debug)]
struct AxisWindows<T> {
    k_max: i64,
    windows: Vec<Vec<(usize, T)>>,
}

/// A partition bound to a grid, with the window samples cached.
#[derive(Clone, Debug)]
pub struct Decomposition<T: Real> {
    grid: Grid<T>,
    partition: Partition<T>,
    axes: Vec<AxisWindows<T>>,
}

impl<T: Real> Decomposition<T> {
    pub fn new(grid: &Grid<T>, partition: &Partition<T>) -> Result<Self> {
        let mut axes = Vec::with_capacity(grid.dim());
        for i in 0..grid.dim() {
            let dxi = grid.dxi(i);
            if dxi > T::lit(0.125) {
                return Err(Error::Resolution(format!(
                    "axis {i}: frequency spacing {dxi} exceeds 1/8; unit windows unresolved"
                )));
            }
            let k_max = grid.k_max(i);
            if k_max < 0 {
                return Err(Error::Resolution(format!(
                    "axis {i}: band max |ξ| = {} too small for any unit box",
                    grid.max_xi(i)
                )));
            }
            let freqs = grid.freqs(i);
            let windows = (-k_max..=k_max)
                .map(|k| {
                    let kk = T::of_i64(k);
                    freqs
                        .iter()
                        .enumerate()
                        .filter_map(|(m, &x)| {
                            let w = partition.eta(x - kk);
                            (w != T::zero()).then_some((m, w))
                        })
                        .collect()
                })
                .collect();
            axes.push(AxisWindows { k_max, windows });
        }
        Ok(Self {
            grid: grid.clone(),
            partition: partition.clone(),
            axes,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn partition(&self) -> &Partition<T> {
        &self.partition
    }
    pub fn k_max(&self) -> Vec<i64> {
        self.axes.iter().map(|a| a.k_max).collect()
    }

    pub fn check_k(&self, k: &[i64]) -> Result<()> {
        ensure!(
            k.len() == self.grid.dim(),
            "lattice point {:?} has wrong dimension for a {}-d grid",
            k,
            self.grid.dim()
        );
        for (i, (&kj, a)) in k.iter().zip(&self.axes).enumerate() {
            if kj.abs() > a.k_max {
                return Err(Error::Resolution(format!(
                    "box k = {k:?} outside the resolvable lattice (axis {i}: |k| ≤ {})",
                    a.k_max
                )));
            }
        }
        Ok(())
    }

    /// Every lattice point `|k_i| ≤ K_max,i`, lexicographic.
    pub fn lattice(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![]];
        for a in &self.axes {
            let mut next = Vec::with_capacity(out.len() * (2 * a.k_max as usize + 1));
            for p in &out {
                for k in -a.k_max..=a.k_max {
                    let mut q = p.clone();
                    q.push(k);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    fn window(&self, axis: usize, k: i64) -> &[(usize, T)] {
        let a = &self.axes[axis];
        &a.windows[(k + a.k_max) as usize]
    }

    /// Visit `(flat raw index, σ_k)` over the support of `σ_k`.
    fn for_support(&self, k: &[i64], mut f: impl FnMut(usize, T)) {
        let strides = self.grid.strides();
        fn rec<T: Real>(
            d: &Decomposition<T>,
            k: &[i64],
            strides: &[usize],
            axis: usize,
            base: usize,
            w: T,
            f: &mut dyn FnMut(usize, T),
        ) {
            if axis == k.len() {
                f(base, w);
                return;
            }
            for &(m, e) in d.window(axis, k[axis]) {
                rec(d, k, strides, axis + 1, base + m * strides[axis], w * e, f);
            }
        }
        rec(self, k, &strides, 0, 0, T::one(), &mut f);
    }

    /// `σ_k · spec` as a full zero-filled raw spectrum.
    pub fn box_spectrum(&self, spec: &[Complex<T>], k: &[i64]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); spec.len()];
        self.for_support(k, |m, w| out[m] = spec[m] * w);
        out
    }

    /// `Σ_ξ |σ_k f̂|²` in raw DFT units.
    pub fn box_energy(&self, spec: &[Complex<T>], k: &[i64]) -> T {
        let mut acc = NeumaierSum::new();
        self.for_support(k, |m, w| acc.add((spec[m] * w).norm_sqr()));
        acc.value()
    }

    /// `Σ_ξ |ξ_axis|² |σ_k f̂|²` in raw DFT units.
    pub fn box_moment(&self, spec: &[Complex<T>], k: &[i64], axis: usize) -> T {
        let freqs = self.grid.freqs(axis);
        let strides = self.grid.strides();
        let n = self.grid.samples()[axis];
        let mut acc = NeumaierSum::new();
        self.for_support(k, |m, w| {
            let xi = freqs[(m / strides[axis]) % n];
            acc.add(xi * xi * (spec[m] * w).norm_sqr());
        });
        acc.value()
    }

    /// `‖□_k f‖_p` from the raw spectrum of `f`.
    pub fn box_lp(&self, spec: &[Complex<T>], k: &[i64], p: f64) -> T {
        if p == 2.0 {
            // Parseval: ‖g‖₂² = cell/N Σ|ĝ|²
            let s = self.grid.cell() / T::of_usize(self.grid.len());
            return (self.box_energy(spec, k) * s).sqrt();
        }
        let g = ComplexField::from_dft(&self.grid, self.box_spectrum(spec, k));
        g.lp_norm(p)
    }

    pub fn box_op(&self, k: &[i64], f: &ComplexField<T>) -> Result<ComplexField<T>> {
        self.check_k(k)?;
        crate::fields::check_grid(&self.grid, f.grid())?;
        let spec = f.dft();
        Ok(ComplexField::from_dft(&self.grid, self.box_spectrum(&spec, k)))
    }

    pub fn modulation_norm(&self, f: &ComplexField<T>, spec: &NormSpec) -> Result<T> {
        spec.validate()?;
        crate::fields::check_grid(&self.grid, f.grid())?;
        let dft = f.dft();
        Ok(self.modulation_norm_dft(&dft, spec))
    }

    /// Boxes holding less than `1e-32` of the total spectral energy are
    /// skipped; everything else is computed, in parallel, and reduced in
    /// lattice order.
    pub fn modulation_norm_dft(&self, dft: &[Complex<T>], spec: &NormSpec) -> T {
        let total = dft.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if total == T::zero() {
            return T::zero();
        }
        let floor = total * T::lit(1e-32);
        let lattice = self.lattice();
        let terms: Vec<Option<T>> = lattice
            .par_iter()
            .map(|k| {
                if self.box_energy(dft, k) <= floor {
                    return None;
                }
                let w = T::lit(bracket(k).powf(spec.s));
                Some(w * self.box_lp(dft, k, spec.p))
            })
            .collect();
        reduce_lq(terms.into_iter().flatten(), spec.q)
    }
}

pub(crate) fn reduce_lq<T: Real>(terms: impl Iterator<Item = T>, q: f64) -> T {
    if q.is_infinite() {
        return terms.fold(T::zero(), T::max);
    }
    let mut acc = NeumaierSum::new();
    for t in terms {
        acc.add(pow_abs(Complex::new(t, T::zero()), q));
    }
    acc.value().powf(T::lit(1.0 / q))
}

pub fn box_op<T: Real>(k: &[i64], f: &ComplexField<T>, p: &Partition<T>) -> Result<ComplexField<T>> {
    Decomposition::new(f.grid(), p)?.box_op(k, f)
}

pub fn modulation_norm<T: Real>(f: &ComplexField<T>, spec: &NormSpec, p: &Partition<T>) -> Result<T> {
    Decomposition::new(f.grid(), p)?.modulation_norm(f, spec)
}

/// Analysis window of the short-time Fourier transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum StftWindow {
    /// `e^{−|x|²/(2w²)}`
    Gaussian { width: f64 },
}

impl Default for StftWindow {
    fn default() -> Self {
        StftWindow::Gaussian { width: 1.0 }
    }
}

/// `(∫⟨ω⟩^{sq} ‖V_g f(·, ω)‖_p^q dω)^{1/q}` with `ω` on the unit lattice
/// `|ω|_∞ ≤ K_max` and the x-integral by Riemann sum.
pub fn stft_modulation_norm<T: Real>(
    f: &ComplexField<T>,
    spec: &NormSpec,
    window: StftWindow,
) -> Result<T> {
    spec.validate()?;
    let grid = f.grid();
    let StftWindow::Gaussian { width } = window;
    ensure!(width > 0.0, "window width must be positive");
    if f.is_zero() {
        return Ok(T::zero());
    }
    let n = grid.dim();
    // window centred on node 0 with periodic displacement
    let g = ComplexField::from_fn(grid, |x| {
        let mut d2 = 0.0;
        for i in 0..n {
            let l = grid.half_extents()[i].as_f64();
            let d = (x[i].as_f64() + l).rem_euclid(2.0 * l);
            let d = if d >= l { d - 2.0 * l } else { d };
            d2 += d * d;
        }
        Complex::new(T::lit((-d2 / (2.0 * width * width)).exp()), T::zero())
    });
    let ghat = g.dft();
    let k_max: Vec<i64> = (0..n).map(|i| grid.k_max(i)).collect();
    ensure!(k_max.iter().all(|&k| k >= 0), "grid band too small for the ω lattice");
    let mut omegas = vec![vec![]];
    for &km in &k_max {
        omegas = omegas
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (-km..=km).map(move |w| {
                    let mut q = p.clone();
                    q.push(w);
                    q
                })
            })
            .collect();
    }
    let cell = grid.cell();
    let coords: Vec<Vec<T>> = (0..n).map(|i| grid.coords(i)).collect();
    let terms: Vec<T> = omegas
        .par_iter()
        .map(|w| {
            let mut h: Vec<Complex<T>> = f
                .data()
                .iter()
                .enumerate()
                .map(|(flat, &z)| {
                    let idx = grid.unravel(flat);
                    let ph = (0..n).fold(T::zero(), |a, i| a + T::of_i64(w[i]) * coords[i][idx[i]]);
                    z * Complex::from_polar(T::one(), -ph)
                })
                .collect();
            grid.dft(&mut h);
            for (a, b) in h.iter_mut().zip(&ghat) {
                *a = *a * *b * cell;
            }
            let v = if spec.p == 2.0 {
                let s = h.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
                (s * cell / T::of_usize(grid.len())).sqrt()
            } else {
                ComplexField::from_dft(grid, h).lp_norm(spec.p)
            };
            T::lit(bracket(w).powf(spec.s)) * v
        })
        .collect();
    Ok(reduce_lq(terms.into_iter(), spec.q))
}

/// `‖□_k f̄ − conj(□_{−k} f)‖₂ < 1e−10 ‖f‖₂`; no `(−1)^n` factor.
pub fn conj_box_symmetry_check<T: Real>(
    f: &ComplexField<T>,
    k: &[i64],
    dec: &Decomposition<T>,
) -> Result<bool> {
    let neg: Vec<i64> = k.iter().map(|x| -x).collect();
    let a = dec.box_op(k, &f.conj())?;
    let b = dec.box_op(&neg, f)?.conj();
    Ok(a.sub(&b).l2_norm() <= T::lit(1e-10) * f.l2_norm())
}

/// The product-support lemma: `□_k(Π_s □_{k^(s)} u_s) = 0` when some axis has
/// `|k_i − Σ_s k_i^(s)| > r + 1`. Products are formed on a grid padded by
/// `padding` (at least `⌈(r+1)/2⌉`); returns `true` vacuously when the index
/// condition fails.
pub fn product_support_check<T: Real>(
    k: &[i64],
    k_list: &[Vec<i64>],
    u_list: &[ComplexField<T>],
    dec: &Decomposition<T>,
    padding: Option<usize>,
) -> Result<bool> {
    let r = u_list.len();
    ensure!(r >= 1, "empty product");
    ensure!(k_list.len() == r, "{} indices for {} factors", k_list.len(), r);
    dec.check_k(k)?;
    for (ks, u) in k_list.iter().zip(u_list) {
        dec.check_k(ks)?;
        crate::fields::check_grid(dec.grid(), u.grid())?;
    }
    let n = dec.grid().dim();
    let sum: Vec<i64> = (0..n).map(|i| k_list.iter().map(|ks| ks[i]).sum()).collect();
    let separated = (0..n).any(|i| (k[i] - sum[i]).abs() > r as i64 + 1);
    if !separated {
        return Ok(true);
    }
    let min_pad = (r + 1).div_ceil(2);
    let pad = padding.unwrap_or(min_pad);
    ensure!(pad >= min_pad, "padding {pad} below ⌈(r+1)/2⌉ = {min_pad}: aliasing risk");
    let grid = dec.grid();
    let padded = grid.resample(&grid.samples().iter().map(|s| s * pad).collect::<Vec<_>>())?;
    for i in 0..n {
        // product band plus the target window must sit inside the padded band
        let reach = (sum[i].abs() + r as i64).max(k[i].abs() + 1) as f64;
        if reach >= padded.max_xi(i).as_f64() {
            return Err(Error::Resolution(format!(
                "padding {pad} leaves axis {i} unresolved: product band reaches {reach}"
            )));
        }
    }
    let mut prod = vec![Complex::new(T::one(), T::zero()); padded.len()];
    let mut scale = T::one();
    for (ks, u) in k_list.iter().zip(u_list) {
        let b = dec.box_spectrum(&u.dft(), ks);
        let mut up = zero_pad(grid, &padded, &b);
        padded.idft(&mut up);
        for (p, z) in prod.iter_mut().zip(&up) {
            *p = *p * *z;
        }
        scale = scale * u.l2_norm();
    }
    let pdec = Decomposition::new(&padded, dec.partition())?;
    padded.dft(&mut prod);
    let boxed = ComplexField::from_dft(&padded, pdec.box_spectrum(&prod, k));
    Ok(boxed.l2_norm() <= T::lit(1e-10) * scale)
}

/// Embed a raw spectrum of `from` into the larger grid `to` (same box),
/// rescaled so the inverse transform interpolates the same function.
pub(crate) fn zero_pad<T: Real>(from: &Grid<T>, to: &Grid<T>, spec: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); to.len()];
    let ratio = T::of_usize(to.len()) / T::of_usize(from.len());
    let ts = to.strides();
    for (flat, &z) in spec.iter().enumerate() {
        if z.re == T::zero() && z.im == T::zero() {
            continue;
        }
        let idx = from.unravel(flat);
        let mut t = 0;
        for i in 0..from.dim() {
            t += to.raw_index(i, from.mode(i, idx[i])) * ts[i];
        }
        out[t] = z * ratio;
    }
    out
}

/// Inverse of [`zero_pad`]: keep the modes the small grid represents.
pub(crate) fn truncate_spectrum<T: Real>(
    from: &Grid<T>,
    to: &Grid<T>,
    spec: &[Complex<T>],
) -> Vec<Complex<T>> {
    let ratio = T::of_usize(to.len()) / T::of_usize(from.len());
    let fs = from.strides();
    (0..to.len())
        .map(|flat| {
            let idx = to.unravel(flat);
            let mut t = 0;
            for i in 0..to.dim() {
                t += from.raw_index(i, to.mode(i, idx[i])) * fs[i];
            }
            spec[t] * ratio
        })
        .collect()
}

/// `‖∂_{x₂}□_k f‖₂ / ‖∂_{x₁}□_k f‖₂` for `|k₁| ≥ max(|k₂|, 20)` in 2D.
pub fn direction_transfer_check<T: Real>(
    f: &ComplexField<T>,
    k: &[i64],
    dec: &Decomposition<T>,
) -> Result<T> {
    ensure!(dec.grid().dim() == 2, "direction transfer needs a 2-d grid");
    ensure!(
        k.len() == 2 && k[0].abs() >= k[1].abs().max(20),
        "direction transfer needs |k₁| ≥ max(|k₂|, 20), got {k:?}"
    );
    dec.check_k(k)?;
    crate::fields::check_grid(dec.grid(), f.grid())?;
    let spec = f.dft();
    let num = dec.box_moment(&spec, k, 1);
    let den = dec.box_moment(&spec, k, 0);
    if den == T::zero() {
        return Ok(T::zero());
    }
    Ok((num / den).sqrt())
}
