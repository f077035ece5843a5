//! Composite frequency-decomposed space-time semi-norms: sums over boxes of
//! weighted mixed norms of `□_k u`, restricted to the simulated time window.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::ensure;
use crate::fields::{MixedNorm, MixedNormAcc, SpaceTimeField};
use crate::freqdecomp::{bracket, Decomposition, Partition};
use crate::{Complex, Error, NeumaierSum, Real, Result};

/// Which semi-norm. `Sm`, `Max`, `Str` carry the exponent parameter `m ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SeminormId {
    Sm { m: u32 },
    Max { m: u32 },
    Str { m: u32 },
    Sm2,
    Max2d,
    Ant,
    Str2,
    Gstr,
    Sm1,
    Max1,
    Ant1,
    Str1,
    Gstr1,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Weight {
    One,
    /// `⟨k⟩^s`
    Full(f64),
    /// `⟨k_i⟩^s`
    Axis(usize, f64),
}

impl Weight {
    fn eval(&self, k: &[i64]) -> f64 {
        match *self {
            Weight::One => 1.0,
            Weight::Full(s) => bracket(k).powf(s),
            Weight::Axis(i, s) => bracket(&k[i..=i]).powf(s),
        }
    }
}

/// One `Σ_k w(k) ‖□_k u‖_{N_1 ∩ N_2 …}` piece; `∩` is realised as max.
#[derive(Clone, Debug, PartialEq)]
struct Term {
    /// `|k_i| ≥ 20 ∨ max_{j≠i} |k_j|`
    smoothing_axis: Option<usize>,
    weight: Weight,
    norms: Vec<MixedNorm>,
}

/// Admissibility threshold of the smoothing norms.
pub const SMOOTHING_THRESHOLD: i64 = 20;

impl Term {
    fn admits(&self, k: &[i64]) -> bool {
        match self.smoothing_axis {
            None => true,
            Some(i) => {
                let others = k
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v.abs())
                    .max()
                    .unwrap_or(0);
                k[i].abs() >= SMOOTHING_THRESHOLD.max(others)
            }
        }
    }
}

const INF: f64 = f64::INFINITY;

fn aniso(axis: usize, outer: f64, inner: f64) -> MixedNorm {
    MixedNorm::Anisotropic { axis, outer, inner }
}

impl SeminormId {
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        use SeminormId::*;
        match self {
            Sm { m } | Max { m } | Str { m } => {
                ensure!(*m >= 2, "{self}: parameter m must be at least 2");
            }
            Sm2 | Max2d | Ant | Str2 | Gstr => {
                ensure!(dim == 2, "{self} is defined on 2-d grids only (got {dim}-d)");
            }
            Sm1 | Max1 | Ant1 | Str1 | Gstr1 => {
                ensure!(dim == 1, "{self} is defined on 1-d grids only (got {dim}-d)");
            }
        }
        Ok(())
    }

    fn terms(&self, dim: usize) -> Vec<Term> {
        use SeminormId::*;
        let per_axis = |f: &dyn Fn(usize) -> Term| (0..dim).map(f).collect::<Vec<_>>();
        match *self {
            Sm { m } => per_axis(&|i| Term {
                smoothing_axis: Some(i),
                weight: Weight::Axis(i, 0.5 + 1.0 / m as f64),
                norms: vec![aniso(i, INF, 2.0)],
            }),
            Max { m } => per_axis(&|i| Term {
                smoothing_axis: None,
                weight: Weight::One,
                norms: vec![aniso(i, m as f64, INF)],
            }),
            Str { m } => vec![Term {
                smoothing_axis: None,
                weight: Weight::Full(1.0 / m as f64),
                norms: vec![
                    MixedNorm::TimeOuter { space: 2.0, time: INF },
                    MixedNorm::full(m as f64 + 2.0),
                ],
            }],
            Sm2 => per_axis(&|i| Term {
                smoothing_axis: Some(i),
                weight: Weight::Axis(i, 1.5),
                norms: vec![aniso(i, INF, 2.0)],
            }),
            Max2d => per_axis(&|i| Term {
                smoothing_axis: None,
                weight: Weight::One,
                norms: vec![aniso(i, 2.0, INF)],
            }),
            Ant => per_axis(&|i| Term {
                smoothing_axis: None,
                weight: Weight::One,
                norms: vec![aniso(i, 2.0, 4.0)],
            }),
            Str2 => vec![Term {
                smoothing_axis: None,
                weight: Weight::Full(1.0),
                norms: vec![MixedNorm::TimeOuter { space: 2.0, time: INF }, MixedNorm::full(4.0)],
            }],
            Gstr => vec![Term {
                smoothing_axis: None,
                weight: Weight::One,
                norms: vec![MixedNorm::full(3.0)],
            }],
            Sm1 => vec![Term {
                smoothing_axis: Some(0),
                weight: Weight::Full(4.0 / 3.0),
                norms: vec![aniso(0, INF, 2.0)],
            }],
            Max1 => vec![Term {
                smoothing_axis: None,
                weight: Weight::One,
                norms: vec![aniso(0, 3.0, INF)],
            }],
            Ant1 => vec![Term {
                smoothing_axis: None,
                weight: Weight::One,
                norms: vec![aniso(0, 3.0, 6.0)],
            }],
            Str1 => vec![Term {
                smoothing_axis: None,
                weight: Weight::Full(5.0 / 6.0),
                norms: vec![MixedNorm::TimeOuter { space: 2.0, time: INF }, MixedNorm::full(6.0)],
            }],
            Gstr1 => vec![Term {
                smoothing_axis: None,
                weight: Weight::One,
                norms: vec![MixedNorm::full(4.0)],
            }],
        }
    }

    /// The ids making up the solution-space norm used for a dimension:
    /// `sm ∩ max ∩ str` with `m` in general, the five-norm sets in 1D and 2D.
    pub fn solution_space(dim: usize, m: u32) -> Vec<SeminormId> {
        use SeminormId::*;
        match dim {
            1 => vec![Sm1, Max1, Ant1, Str1, Gstr1],
            2 => vec![Sm2, Max2d, Ant, Str2, Gstr],
            _ => vec![Sm { m }, Max { m }, Str { m }],
        }
    }
}

impl fmt::Display for SeminormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SeminormId::*;
        match self {
            Sm { m } => write!(f, "sm:{m}"),
            Max { m } => write!(f, "max:{m}"),
            Str { m } => write!(f, "str:{m}"),
            Sm2 => f.write_str("sm2"),
            Max2d => f.write_str("max2d"),
            Ant => f.write_str("ant"),
            Str2 => f.write_str("str2"),
            Gstr => f.write_str("gstr"),
            Sm1 => f.write_str("sm1"),
            Max1 => f.write_str("max1"),
            Ant1 => f.write_str("ant1"),
            Str1 => f.write_str("str1"),
            Gstr1 => f.write_str("gstr1"),
        }
    }
}

impl FromStr for SeminormId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        use SeminormId::*;
        let bad = || Error::Parse(format!("unknown semi-norm id '{s}'"));
        if let Some((tag, m)) = s.split_once(':') {
            let m: u32 = m.parse().map_err(|_| bad())?;
            return match tag {
                "sm" => Ok(Sm { m }),
                "max" => Ok(Max { m }),
                "str" => Ok(Str { m }),
                _ => Err(bad()),
            };
        }
        Ok(match s {
            "sm2" => Sm2,
            "max2d" => Max2d,
            "ant" => Ant,
            "str2" => Str2,
            "gstr" => Gstr,
            "sm1" => Sm1,
            "max1" => Max1,
            "ant1" => Ant1,
            "str1" => Str1,
            "gstr1" => Gstr1,
            _ => return Err(bad()),
        })
    }
}

/// Per-id values over the growing windows `[t_0, t_j]`, `j = 1..J`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeminormTrace<T: Real> {
    pub ids: Vec<SeminormId>,
    pub times: Vec<T>,
    /// `values[j][id]`
    pub values: Vec<Vec<T>>,
}

impl<T: Real> SeminormTrace<T> {
    /// Values over the full window.
    pub fn last(&self) -> &[T] {
        self.values.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn column(&self, id: SeminormId) -> Option<Vec<T>> {
        let c = self.ids.iter().position(|&i| i == id)?;
        Some(self.values.iter().map(|row| row[c]).collect())
    }

    /// CSV with header `t_end,<id>,…`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t_end".to_string()];
        header.extend(self.ids.iter().map(|i| i.to_string()));
        out.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![format!("{:e}", t.as_f64())];
            rec.extend(row.iter().map(|v| format!("{:e}", v.as_f64())));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn composite_seminorm<T: Real>(
    u: &SpaceTimeField<T>,
    id: SeminormId,
    p: &Partition<T>,
) -> Result<T> {
    let dec = Decomposition::new(u.grid(), p)?;
    Ok(evaluate(u, &[id], &dec, false)?.last()[0])
}

pub fn seminorm_trace<T: Real>(
    u: &SpaceTimeField<T>,
    ids: &[SeminormId],
    p: &Partition<T>,
) -> Result<SeminormTrace<T>> {
    let dec = Decomposition::new(u.grid(), p)?;
    evaluate(u, ids, &dec, true)
}

/// Several semi-norms of one field over the full window, sharing the box work.
pub fn composite_seminorms<T: Real>(
    u: &SpaceTimeField<T>,
    ids: &[SeminormId],
    dec: &Decomposition<T>,
) -> Result<Vec<T>> {
    Ok(evaluate(u, ids, dec, false)?.last().to_vec())
}

/// `‖u‖^{id_1 ∩ id_2 ∩ …}`, the intersection realised as the max.
pub fn intersection_norm<T: Real>(
    u: &SpaceTimeField<T>,
    ids: &[SeminormId],
    dec: &Decomposition<T>,
) -> Result<T> {
    Ok(composite_seminorms(u, ids, dec)?.into_iter().fold(T::zero(), T::max))
}

fn evaluate<T: Real>(
    u: &SpaceTimeField<T>,
    ids: &[SeminormId],
    dec: &Decomposition<T>,
    every_window: bool,
) -> Result<SeminormTrace<T>> {
    ensure!(u.len() >= 2, "semi-norms need at least two time slices");
    ensure!(!ids.is_empty(), "no semi-norm ids requested");
    crate::fields::check_grid(dec.grid(), u.grid())?;
    let dim = u.grid().dim();
    for id in ids {
        id.check_dim(dim)?;
    }
    let terms: Vec<Vec<Term>> = ids.iter().map(|id| id.terms(dim)).collect();
    let mut norms: Vec<MixedNorm> = Vec::new();
    for t in terms.iter().flatten() {
        for n in &t.norms {
            if !norms.contains(n) {
                norms.push(*n);
            }
        }
    }
    let grid = u.grid();
    let spectra: Vec<Vec<Complex<T>>> = u.slices().iter().map(|s| s.dft()).collect();
    let total: T = spectra
        .iter()
        .flat_map(|s| s.iter())
        .fold(T::zero(), |a, z| a + z.norm_sqr());
    let floor = total * T::lit(1e-32);
    let windows = if every_window { u.len() - 1 } else { 1 };
    let lattice = dec.lattice();

    // per k: values[window][id], or None when no term sees the box
    let per_k: Vec<Option<Vec<Vec<T>>>> = lattice
        .par_iter()
        .map(|k| -> Result<Option<Vec<Vec<T>>>> {
            let active: Vec<Vec<&Term>> = terms
                .iter()
                .map(|ts| ts.iter().filter(|t| t.admits(k)).collect())
                .collect();
            if active.iter().all(|a| a.is_empty()) || total == T::zero() {
                return Ok(None);
            }
            let energy = spectra.iter().fold(T::zero(), |a, s| a + dec.box_energy(s, k));
            if energy <= floor {
                return Ok(None);
            }
            let needed: Vec<bool> = norms
                .iter()
                .map(|n| active.iter().flatten().any(|t| t.norms.contains(n)))
                .collect();
            let mut accs: Vec<Option<MixedNormAcc<T>>> = norms
                .iter()
                .zip(&needed)
                .map(|(n, &need)| need.then(|| MixedNormAcc::new(*n, grid, u.dt())).transpose())
                .collect::<Result<_>>()?;
            let mut rows = Vec::with_capacity(windows);
            for (j, spec) in spectra.iter().enumerate() {
                let mut b = dec.box_spectrum(spec, k);
                grid.idft(&mut b);
                for acc in accs.iter_mut().flatten() {
                    acc.push(&b);
                }
                if j >= 1 && (every_window || j + 1 == spectra.len()) {
                    let vals: Vec<T> = norms
                        .iter()
                        .zip(&accs)
                        .map(|(_, a)| a.as_ref().map(|a| a.value()).unwrap_or(T::zero()))
                        .collect();
                    let row = active
                        .iter()
                        .map(|ts| {
                            let mut acc = NeumaierSum::new();
                            for t in ts {
                                let v = t
                                    .norms
                                    .iter()
                                    .map(|n| vals[norms.iter().position(|m| m == n).unwrap()])
                                    .fold(T::zero(), T::max);
                                acc.add(T::lit(t.weight.eval(k)) * v);
                            }
                            acc.value()
                        })
                        .collect();
                    rows.push(row);
                }
            }
            Ok(Some(rows))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![vec![NeumaierSum::new(); ids.len()]; windows];
    for rows in per_k.into_iter().flatten() {
        for (s, row) in sums.iter_mut().zip(rows) {
            for (a, v) in s.iter_mut().zip(row) {
                a.add(v);
            }
        }
    }
    let times = if every_window {
        (1..u.len()).map(|j| u.time(j)).collect()
    } else {
        vec![u.time(u.len() - 1)]
    };
    Ok(SeminormTrace {
        ids: ids.to_vec(),
        times,
        values: sums
            .into_iter()
            .map(|r| r.into_iter().map(|a| a.value()).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_through_strings() {
        let all = [
            SeminormId::Sm { m: 2 },
            SeminormId::Max { m: 4 },
            SeminormId::Str { m: 3 },
            SeminormId::Sm2,
            SeminormId::Max2d,
            SeminormId::Ant,
            SeminormId::Str2,
            SeminormId::Gstr,
            SeminormId::Sm1,
            SeminormId::Max1,
            SeminormId::Ant1,
            SeminormId::Str1,
            SeminormId::Gstr1,
        ];
        for id in all {
            assert_eq!(id.to_string().parse::<SeminormId>().unwrap(), id);
        }
        assert!("bogus".parse::<SeminormId>().is_err());
        assert!(SeminormId::Sm { m: 1 }.check_dim(2).is_err());
        assert!(SeminormId::Sm2.check_dim(1).is_err());
    }

    #[test]
    fn smoothing_filter() {
        let t = &SeminormId::Sm { m: 2 }.terms(2)[0];
        assert!(t.admits(&[25, 0]));
        assert!(t.admits(&[-20, 20]));
        assert!(!t.admits(&[19, 0]));
        assert!(!t.admits(&[21, 22]));
    }
}
