//! JSON config schemas, one per subcommand. Unknown keys are rejected; the
//! only optional keys are the ones typed `Option` below.

use std::f64::consts::PI;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use modlab::estimates::CaseParams;
use modlab::families::{band_limited, gaussian, wave_packets};
use modlab::fields::{ComplexField, Grid, Signature};
use modlab::gabor::Truncation;
use modlab::seminorms::SeminormId;
use modlab::solver::{NonlinearityKind, SolverParams};
use modlab::{Complex, Error, Result};

pub fn load<C: DeserializeOwned>(path: &Path) -> Result<C> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("malformed config {}: {e}", path.display())))
}

/// `x_j ∈ [−π·half_extent_pi, π·half_extent_pi)` with `samples` nodes per axis.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_extent_pi: Vec<f64>,
    pub samples: Vec<usize>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid<f64>> {
        let l: Vec<f64> = self.half_extent_pi.iter().map(|v| v * PI).collect();
        Grid::new(&l, &self.samples)
    }
}

pub fn signature(eps: &[i8]) -> Result<Signature> {
    Signature::new(eps)
}

/// Seeded data families.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataConfig {
    BandLimited { band: f64, amplitude: f64 },
    WavePackets { count: usize, lo: Vec<f64>, hi: Vec<f64>, band: f64, amplitude: f64 },
    Gaussian { center: Vec<f64>, freq: Vec<f64>, width: f64, amplitude: f64 },
}

impl DataConfig {
    pub fn build(&self, grid: &Grid<f64>, seed: u64) -> Result<ComplexField<f64>> {
        let n = grid.dim();
        let check = |name: &str, v: &[f64]| {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::Validation(format!("data.{name} has {} entries for a {n}-d grid", v.len())))
            }
        };
        let (f, a) = match self {
            DataConfig::BandLimited { band, amplitude } => (band_limited(grid, *band, seed), *amplitude),
            DataConfig::WavePackets { count, lo, hi, band, amplitude } => {
                check("lo", lo)?;
                check("hi", hi)?;
                (wave_packets(grid, *count, lo, hi, *band, seed), *amplitude)
            }
            DataConfig::Gaussian { center, freq, width, amplitude } => {
                check("center", center)?;
                check("freq", freq)?;
                (gaussian(grid, center, freq, *width), *amplitude)
            }
        };
        Ok(f.scale(Complex::new(a, 0.0)))
    }
}

fn complex(v: [f64; 2]) -> Complex<f64> {
    Complex::new(v[0], v[1])
}

/// Solver parameters; complex numbers are `[re, im]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub signature: Vec<i8>,
    pub kind: NonlinearityKind,
    pub lambda: Vec<[f64; 2]>,
    pub kappa: u32,
    pub mu: [f64; 2],
    pub nu: u32,
    pub dt: f64,
    pub t_end: f64,
    pub padding: f64,
    pub snapshots: usize,
}

impl SolverConfig {
    pub fn build(&self) -> Result<SolverParams<f64>> {
        let p = SolverParams {
            signature: signature(&self.signature)?,
            kind: self.kind,
            lambda: self.lambda.iter().map(|&v| complex(v)).collect(),
            kappa: self.kappa,
            mu: complex(self.mu),
            nu: self.nu,
            dt: self.dt,
            t_end: self.t_end,
            padding: self.padding,
            snapshots: self.snapshots,
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn seminorm_ids(names: &[String]) -> Result<Vec<SeminormId>> {
    names.iter().map(|s| s.parse()).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub grid: GridConfig,
    pub family_size: usize,
    pub band: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub grid: GridConfig,
    pub data: DataConfig,
    pub seed: Option<u64>,
    pub s: f64,
    #[serde(with = "modlab::io::exponent")]
    pub p: f64,
    #[serde(with = "modlab::io::exponent")]
    pub q: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaborConfig {
    pub grid: GridConfig,
    pub data: DataConfig,
    pub seed: Option<u64>,
    pub truncation: Truncation,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    pub grid: GridConfig,
    pub data: DataConfig,
    pub seed: Option<u64>,
    pub signature: Vec<i8>,
    pub times: Vec<f64>,
    /// When present the Gabor realisation is compared against the spectral one.
    pub truncation: Option<Truncation>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub grid: GridConfig,
    pub signature: Vec<i8>,
    /// Sweep values of `k₁`; `k = (k₁, 0, …)`.
    pub k1: Vec<i64>,
    pub slices: usize,
    pub seed: Option<u64>,
    /// Largest admissible window when absent.
    pub window: Option<f64>,
    /// Case defaults when absent.
    pub params: Option<CaseParams>,
    pub refine: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub grid: GridConfig,
    pub data: DataConfig,
    pub seed: Option<u64>,
    pub solver: SolverConfig,
    pub seminorms: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub grid: GridConfig,
    pub data: DataConfig,
    pub seed: Option<u64>,
    pub solver: SolverConfig,
    pub iterations: usize,
    pub window: f64,
    pub slices: usize,
    pub seminorms: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupConfig {
    pub t: f64,
    pub t_blow: f64,
    pub center: [f64; 2],
    pub radius: f64,
    pub spacing: f64,
    pub h: f64,
    pub grid: GridConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflateConfig {
    pub kappa: u32,
    pub s: f64,
    pub n: Vec<f64>,
    pub eps: f64,
    pub window: f64,
    pub grid: GridConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    pub grid: GridConfig,
    pub seed: Option<u64>,
    pub s: f64,
    pub b: f64,
    pub refine: bool,
}
