//! Seeded data generators shared by the harnesses and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{ComplexField, Grid};
use crate::{Complex, Real};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; one draw per call is plenty here
    let u1: f64 = r.gen_range(f64::EPSILON..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn complex_normal<T: Real>(r: &mut ChaCha8Rng) -> Complex<T> {
    Complex::new(T::lit(normal(r)), T::lit(normal(r)))
}

/// Random spectrum on the nodes with `|ξ|_∞ < band`, smoothly tapered to
/// zero at the band edge, unit L² norm. Spread over the whole box.
pub fn band_limited<T: Real>(grid: &Grid<T>, band: f64, seed: u64) -> ComplexField<T> {
    let mut r = rng(seed);
    let freqs: Vec<Vec<T>> = (0..grid.dim()).map(|i| grid.freqs(i)).collect();
    let mut spec = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for (flat, z) in spec.iter_mut().enumerate() {
        let idx = grid.unravel(flat);
        let mut taper = 1.0;
        for i in 0..grid.dim() {
            let x = freqs[i][idx[i]].as_f64().abs() / band;
            taper *= if x < 1.0 { (1.0 - x * x).powi(2) } else { 0.0 };
        }
        // draw unconditionally so the stream does not depend on the band
        let c: Complex<T> = complex_normal(&mut r);
        *z = c * T::lit(taper);
    }
    normalize(ComplexField::from_dft(grid, spec))
}

/// Sum of `count` Gaussian wave packets with centres in `[-radius, radius]^n`,
/// carrier frequencies in `[lo, hi]` per axis and widths in `[0.8, 1.4]`.
pub fn wave_packets<T: Real>(
    grid: &Grid<T>,
    count: usize,
    lo: &[f64],
    hi: &[f64],
    radius: f64,
    seed: u64,
) -> ComplexField<T> {
    let mut r = rng(seed);
    let n = grid.dim();
    let mut packets = Vec::with_capacity(count);
    for _ in 0..count {
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-radius..=radius)).collect();
        let w: Vec<f64> = (0..n).map(|i| r.gen_range(lo[i]..=hi[i])).collect();
        let width: f64 = r.gen_range(0.8..1.4);
        let c: Complex<f64> = Complex::new(normal(&mut r), normal(&mut r));
        packets.push((y, w, width, c));
    }
    let f = ComplexField::from_fn(grid, |x| {
        let mut acc = Complex::new(0.0, 0.0);
        for (y, w, width, c) in &packets {
            let mut d2 = 0.0;
            let mut ph = 0.0;
            for i in 0..n {
                let xi = x[i].as_f64();
                d2 += (xi - y[i]).powi(2);
                ph += w[i] * xi;
            }
            acc += c * Complex::from_polar((-d2 / (2.0 * width * width)).exp(), ph);
        }
        Complex::new(T::lit(acc.re), T::lit(acc.im))
    });
    normalize(f)
}

/// `e^{iω·x} e^{-|x-y|²/(2w²)}`
pub fn gaussian<T: Real>(grid: &Grid<T>, center: &[f64], freq: &[f64], width: f64) -> ComplexField<T> {
    ComplexField::from_fn(grid, |x| {
        let mut d2 = 0.0;
        let mut ph = 0.0;
        for i in 0..grid.dim() {
            let xi = x[i].as_f64();
            d2 += (xi - center[i]).powi(2);
            ph += freq[i] * xi;
        }
        let z = Complex::from_polar((-d2 / (2.0 * width * width)).exp(), ph);
        Complex::new(T::lit(z.re), T::lit(z.im))
    })
}

pub fn normalize<T: Real>(f: ComplexField<T>) -> ComplexField<T> {
    let n = f.l2_norm();
    if n > T::zero() {
        f.scale(Complex::new(T::one() / n, T::zero()))
    } else {
        f
    }
}
