use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use modlab::estimates::{refinement_check_of, run_estimate, CaseId, EstimateCase, Sweep};
use modlab::families::band_limited;
use modlab::fields::make_grid;
use modlab::freqdecomp::{Decomposition, NormSpec, Partition};
use modlab::gabor::{analyze, frame_bounds, synthesize};
use modlab::io::{save_coefficients, write_csv_rows, write_json};
use modlab::propagator::{propagate_gabor, propagate_spectral};
use modlab::scenarios::{
    blowup_curve_max, blowup_residual, blowup_sphere, embedding_family, embedding_refinement, embedding_sweep,
    norm_inflation_sweep, schmap_residual, Patch, BLOWUP_BOX_SIGN,
};
use modlab::solver::{evolve, picard_iterate};
use modlab::{Complex, Error, Result};

use crate::config::{self, GridConfig};

/// What a command reports back: a one-line summary, and whether the run
/// detected a numerical failure after writing its outputs.
pub struct Outcome {
    pub summary: String,
    pub numerical_failure: bool,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { summary, numerical_failure: false }
    }
}

pub struct Common {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Common {
    fn load<C: serde::de::DeserializeOwned>(&self) -> Result<Option<C>> {
        self.config.as_deref().map(config::load).transpose()
    }

    fn require<C: serde::de::DeserializeOwned>(&self, cmd: &str) -> Result<C> {
        self.load()?.ok_or_else(|| Error::Validation(format!("{cmd} needs --config PATH")))
    }

    fn seed(&self, from_config: Option<u64>) -> Result<u64> {
        self.seed
            .or(from_config)
            .ok_or_else(|| Error::Validation("a seed is required: pass --seed or set \"seed\" in the config".into()))
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    fn json<S: Serialize>(&self, name: &str, value: &S) -> Result<()> {
        write_json(value, &self.path(name)?)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let f = File::create(self.path(name)?)?;
        write_csv_rows(BufWriter::new(f), header, rows)
    }
}

fn e(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Serialize)]
struct PartitionReport {
    max_sum_defect: f64,
    max_reconstruction_error: f64,
    members: usize,
}

pub fn partition_check(c: &Common) -> Result<Outcome> {
    let cfg = c.load::<config::PartitionConfig>()?;
    let (grid, size, band, seed) = match &cfg {
        Some(cfg) => (cfg.grid.build()?, cfg.family_size, cfg.band, c.seed(cfg.seed)?),
        None => (make_grid(2, 8.0 * PI, 128)?, 20, 3.5, c.seed(None)?),
    };
    let p = Partition::new();
    let dec = Decomposition::new(&grid, &p)?;
    // Σ_k σ_k at every node
    let mut defect = 0.0f64;
    let freqs: Vec<Vec<f64>> = (0..grid.dim()).map(|i| grid.freqs(i)).collect();
    for flat in 0..grid.len() {
        let xi: Vec<f64> = grid.unravel(flat).iter().enumerate().map(|(i, &j)| freqs[i][j]).collect();
        let mut ks = vec![vec![]];
        for x in &xi {
            let k0 = x.round() as i64;
            ks = ks
                .into_iter()
                .flat_map(|k: Vec<i64>| {
                    (k0 - 2..=k0 + 2).map(move |v| {
                        let mut q = k.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        let s: f64 = ks.iter().map(|k| p.sigma(k, &xi)).sum();
        defect = defect.max((s - 1.0).abs());
    }
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for m in 0..size {
        let f = band_limited::<f64>(&grid, band, seed.wrapping_add(m as u64));
        let mut sum = modlab::fields::ComplexField::zeros(&grid);
        for k in dec.lattice() {
            sum.axpy(Complex::new(1.0, 0.0), &dec.box_op(&k, &f)?);
        }
        let err = sum.rel_l2_diff(&f);
        worst = worst.max(err);
        rows.push(vec![m.to_string(), e(err)]);
    }
    c.csv("partition.csv", &["member", "reconstruction_error"], &rows)?;
    c.json(
        "partition.json",
        &PartitionReport { max_sum_defect: defect, max_reconstruction_error: worst, members: size },
    )?;
    Ok(Outcome::ok(format!(
        "max |Σσ_k − 1| = {defect:.3e}, max reconstruction error {worst:.3e} over {size} members"
    )))
}

#[derive(Serialize)]
struct NormReport {
    s: f64,
    #[serde(with = "modlab::io::exponent")]
    p: f64,
    #[serde(with = "modlab::io::exponent")]
    q: f64,
    norm: f64,
    l2: f64,
}

pub fn norm(c: &Common) -> Result<Outcome> {
    let cfg: config::NormConfig = c.require("norm")?;
    let grid = cfg.grid.build()?;
    let f = cfg.data.build(&grid, c.seed(cfg.seed)?)?;
    let spec = NormSpec::new(cfg.s, cfg.p, cfg.q)?;
    let v = Decomposition::new(&grid, &Partition::new())?.modulation_norm(&f, &spec)?;
    let r = NormReport { s: cfg.s, p: cfg.p, q: cfg.q, norm: v, l2: f.l2_norm() };
    c.json("norm.json", &r)?;
    Ok(Outcome::ok(format!(
        "M^{}_{{{},{}}} norm = {v:.12e}",
        cfg.s,
        modlab::io::format_exponent(cfg.p),
        modlab::io::format_exponent(cfg.q)
    )))
}

#[derive(Serialize)]
struct GaborReport {
    round_trip: f64,
    frame_a: f64,
    frame_b: f64,
    coefficients: usize,
}

pub fn gabor(c: &Common) -> Result<Outcome> {
    let cfg: config::GaborConfig = c.require("gabor")?;
    let grid = cfg.grid.build()?;
    let f = cfg.data.build(&grid, c.seed(cfg.seed)?)?;
    let coef = analyze(&f, cfg.truncation)?;
    let round = synthesize(&coef, &grid)?.rel_l2_diff(&f);
    let fb = frame_bounds(&grid, cfg.truncation)?;
    save_coefficients(&coef, &c.path("coefficients.txt")?)?;
    c.json(
        "gabor.json",
        &GaborReport { round_trip: round, frame_a: fb.a, frame_b: fb.b, coefficients: coef.len() },
    )?;
    Ok(Outcome::ok(format!(
        "round trip {round:.3e}, frame bounds [{:.6}, {:.6}]",
        fb.a, fb.b
    )))
}

pub fn propagate(c: &Common) -> Result<Outcome> {
    let cfg: config::PropagateConfig = c.require("propagate")?;
    let grid = cfg.grid.build()?;
    let eps = config::signature(&cfg.signature)?;
    let f = cfg.data.build(&grid, c.seed(cfg.seed)?)?;
    let coef = cfg.truncation.map(|t| analyze(&f, t)).transpose()?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &t in &cfg.times {
        let u = propagate_spectral(&f, t, &eps)?;
        let gap = match &coef {
            Some(k) => {
                let d = propagate_gabor(k, t, &eps, &grid)?.rel_l2_diff(&u);
                worst = worst.max(d);
                e(d)
            }
            None => String::new(),
        };
        rows.push(vec![e(t), e(u.l2_norm()), gap]);
    }
    c.csv("propagate.csv", &["t", "l2_norm", "gabor_discrepancy"], &rows)?;
    let mut s = format!("propagated to {} times", cfg.times.len());
    if coef.is_some() {
        s.push_str(&format!(", max Gabor/spectral discrepancy {worst:.3e}"));
    }
    Ok(Outcome::ok(s))
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    report: &'a modlab::estimates::EstimateReport,
    refinement: Option<modlab::estimates::RefinementCheck>,
}

pub fn estimate(c: &Common, case: &str) -> Result<Outcome> {
    let id: CaseId = case.parse()?;
    let cfg: config::EstimateConfig = c.require("estimate")?;
    let grid = cfg.grid.build()?;
    let dim = grid.dim();
    let mut sweep = Sweep::along_axis(grid, config::signature(&cfg.signature)?, &cfg.k1, c.seed(cfg.seed)?);
    sweep.slices = cfg.slices;
    sweep.window = cfg.window;
    let ec = match cfg.params {
        Some(p) => EstimateCase::with_params(id, p),
        None => EstimateCase::new(id, dim),
    };
    let report = run_estimate(&ec, &sweep)?;
    let refinement = cfg.refine.then(|| refinement_check_of(&ec, &sweep, &report)).transpose()?;
    report.write_csv(BufWriter::new(File::create(c.path("estimate.csv")?)?))?;
    report.write_csv(std::io::stdout().lock())?;
    c.json("estimate.json", &EstimateOutput { report: &report, refinement: refinement.clone() })?;
    let mut s = format!(
        "{id}: slope {:.4} (tolerance {}), max ratio {:.6e}",
        report.slope, report.slope_tolerance, report.max_ratio
    );
    if let Some(u) = report.unsmoothed_slope {
        s.push_str(&format!(", unsmoothed slope {u:.4}"));
    }
    if let Some(r) = &refinement {
        s.push_str(&format!(", refinement change {:.3e}", r.rel_change));
    }
    Ok(Outcome::ok(s))
}

#[derive(Serialize)]
struct SolveReport {
    t_end: f64,
    mass_initial: f64,
    mass_final: f64,
    mass_drift_per_time: f64,
    max_amplitude: f64,
}

pub fn solve(c: &Common) -> Result<Outcome> {
    let cfg: config::SolveConfig = c.require("solve")?;
    let grid = cfg.grid.build()?;
    let p = cfg.solver.build()?;
    let ids = config::seminorm_ids(&cfg.seminorms)?;
    let u0 = cfg.data.build(&grid, c.seed(cfg.seed)?)?;
    let (u, trace) = evolve(&u0, &p, &ids, &Partition::new())?;
    trace.write_csv(BufWriter::new(File::create(c.path("trace.csv")?)?))?;
    let last = u.slice(u.len() - 1);
    let (m0, m1) = (u0.l2_norm(), last.l2_norm());
    let drift = if p.t_end > 0.0 && m0 > 0.0 { (m1 / m0 - 1.0).abs() / p.t_end } else { 0.0 };
    let amp = u.slices().iter().map(|s| s.max_abs()).fold(0.0, f64::max);
    c.json(
        "solve.json",
        &SolveReport { t_end: p.t_end, mass_initial: m0, mass_final: m1, mass_drift_per_time: drift, max_amplitude: amp },
    )?;
    Ok(Outcome::ok(format!(
        "evolved to t = {}: mass drift {drift:.3e} per unit time, max |u| {amp:.4e}",
        p.t_end
    )))
}

pub fn picard(c: &Common) -> Result<Outcome> {
    let cfg: config::PicardConfig = c.require("picard")?;
    let grid = cfg.grid.build()?;
    let p = cfg.solver.build()?;
    let ids = config::seminorm_ids(&cfg.seminorms)?;
    let u0 = cfg.data.build(&grid, c.seed(cfg.seed)?)?;
    let tr = picard_iterate(&u0, &p, cfg.iterations, cfg.window, cfg.slices, &ids, &Partition::new())?;
    let rows: Vec<Vec<String>> = tr
        .distances
        .iter()
        .enumerate()
        .map(|(m, d)| {
            let r = if m == 0 { String::new() } else { e(tr.ratios[m - 1]) };
            vec![(m + 1).to_string(), e(*d), r]
        })
        .collect();
    c.csv("picard.csv", &["iterate", "distance", "ratio"], &rows)?;
    c.json("picard.json", &tr)?;
    let ratios: Vec<String> = tr.ratios.iter().map(|r| format!("{r:.3e}")).collect();
    Ok(match tr.diverged_at {
        Some(m) => Outcome {
            summary: format!("Picard iteration diverged at iterate {m}; ratios [{}]", ratios.join(", ")),
            numerical_failure: true,
        },
        None => Outcome::ok(format!("Picard ratios [{}]", ratios.join(", "))),
    })
}

#[derive(Serialize)]
struct BlowupReport {
    t: f64,
    t_blow: f64,
    h: f64,
    unit_defect: f64,
    schmap_residual: f64,
    schmap_residual_half_step: f64,
    observed_order: f64,
    u_residual: f64,
    u_points: usize,
    curve_max_abs: f64,
}

pub fn blowup(c: &Common, t: Option<f64>, t_blow: Option<f64>, h: Option<f64>) -> Result<Outcome> {
    let cfg = c.load::<config::BlowupConfig>()?.unwrap_or(config::BlowupConfig {
        t: 0.7,
        t_blow: 1.0,
        center: [0.0, 0.0],
        radius: 2.0,
        spacing: 0.1,
        h: 1e-3,
        grid: GridConfig { half_extent_pi: vec![4.0, 4.0], samples: vec![128, 128] },
    });
    let t = t.unwrap_or(cfg.t);
    let t_blow = t_blow.unwrap_or(cfg.t_blow);
    let h = h.unwrap_or(cfg.h);
    let grid = cfg.grid.build()?;
    let patch = Patch::new(cfg.center, cfg.radius, cfg.spacing)?;
    let defect = blowup_sphere(t, &grid)?.unit_defect();
    let r1 = schmap_residual(t, &patch, h)?.residual;
    let r2 = schmap_residual(t, &patch, h / 2.0)?.residual;
    let (ur, used) = blowup_residual(t, t_blow, &patch, h, BLOWUP_BOX_SIGN)?;
    let amp = blowup_curve_max(t, t_blow, cfg.radius.max(1.0), 41);
    let r = BlowupReport {
        t,
        t_blow,
        h,
        unit_defect: defect,
        schmap_residual: r1,
        schmap_residual_half_step: r2,
        observed_order: (r1 / r2).log2(),
        u_residual: ur,
        u_points: used,
        curve_max_abs: amp,
    };
    c.json("blowup.json", &r)?;
    Ok(Outcome::ok(format!(
        "| |s|−1 | = {defect:.2e}, map residual {r1:.3e} (order {:.2}), u residual {ur:.3e}, |u| on x₁²−x₂²=4π: {amp:.4e}",
        r.observed_order
    )))
}

pub struct InflateFlags {
    pub kappa: Option<u32>,
    pub s: Option<f64>,
    pub n: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub window: Option<f64>,
}

pub fn inflate(c: &Common, f: InflateFlags) -> Result<Outcome> {
    let cfg = c.load::<config::InflateConfig>()?;
    let kappa = f.kappa.or(cfg.as_ref().map(|c| c.kappa)).unwrap_or(1);
    let s = f.s.or(cfg.as_ref().map(|c| c.s)).unwrap_or(0.0);
    let ns = f.n.or(cfg.as_ref().map(|c| c.n.clone())).unwrap_or_else(|| vec![8.0, 16.0, 32.0, 64.0]);
    let eps = f.eps.or(cfg.as_ref().map(|c| c.eps)).unwrap_or(0.125);
    let n_max = ns.iter().cloned().fold(0.0, f64::max);
    let window = f.window.or(cfg.as_ref().map(|c| c.window)).unwrap_or(0.4 / (n_max * eps));
    let grid = match &cfg {
        Some(c) => c.grid.build()?,
        None => make_grid(1, 64.0 * PI, 32768)?,
    };
    let sig = modlab::fields::Signature::elliptic(1);
    let r = norm_inflation_sweep(kappa, s, eps, &ns, window, &grid, &sig)?;
    let rows: Vec<Vec<String>> = r.norms.iter().map(|(n, v)| vec![e(*n), e(*v)]).collect();
    c.csv("inflate.csv", &["n", "norm"], &rows)?;
    c.json("inflate.json", &r)?;
    println!("slope {:.4}", r.slope);
    Ok(Outcome::ok(format!(
        "κ = {kappa}, s = {s}: fitted exponent {:.4} (1 − 2κs = {})",
        r.slope, r.predicted
    )))
}

pub fn embed(c: &Common, s: Option<f64>, b: Option<f64>) -> Result<Outcome> {
    let cfg = c.load::<config::EmbedConfig>()?;
    let grid = match &cfg {
        Some(c) => c.grid.build()?,
        None => make_grid(2, 8.0 * PI, 256)?,
    };
    let seed = c.seed(cfg.as_ref().and_then(|c| c.seed))?;
    let s = s.or(cfg.as_ref().map(|c| c.s)).unwrap_or(0.0);
    let b = b.or(cfg.as_ref().map(|c| c.b)).unwrap_or(1.5);
    let refine = cfg.as_ref().map(|c| c.refine).unwrap_or(true);
    let (report, extra) = if refine {
        let r = embedding_refinement(&grid, seed, s, b)?;
        let extra = format!(", refined {} {:.6} (change {:.3e})", r.argmax, r.refined_ratio, r.rel_change);
        c.json("embed-refinement.json", &r)?;
        (r.report, extra)
    } else {
        (embedding_sweep(&embedding_family(&grid, seed), s, b)?, String::new())
    };
    let rows: Vec<Vec<String>> = report.ratios.iter().map(|(n, v)| vec![n.clone(), e(*v)]).collect();
    c.csv("embed.csv", &["member", "ratio"], &rows)?;
    c.json("embed.json", &report)?;
    Ok(Outcome::ok(format!("max ratio {:.6}{extra}", report.max_ratio)))
}

pub fn out_dir(p: Option<PathBuf>) -> PathBuf {
    p.unwrap_or_else(|| Path::new("modlab-out").to_path_buf())
}
