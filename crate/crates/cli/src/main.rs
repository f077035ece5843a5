//! `modlab`: partition checks, modulation norms, Gabor analysis, free flow,
//! estimate sweeps, the nonlinear solver and the scenario experiments.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 when a run detects a
//! numerical failure (blow-up, divergence, no convergence).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Common, InflateFlags, Outcome};

#[derive(Parser, Debug)]
#[command(name = "modlab", version, about = "Modulation-space lab for non-elliptic Schrödinger equations")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// JSON config for the subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON reports [default: modlab-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random families; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition of unity and box reconstruction over a seeded family
    PartitionCheck,
    /// Modulation norm of configured data
    Norm,
    /// Gabor analysis, round trip and frame bounds
    Gabor,
    /// Free flow, optionally compared with the Gabor realisation
    Propagate,
    /// One estimate case over a frequency sweep
    Estimate {
        /// Case id: a name such as smooth-effect or a letter a–i, e1–e4
        #[arg(long)]
        case: String,
    },
    /// Nonlinear evolution with a semi-norm trace
    Solve,
    /// Picard iteration of the Duhamel map
    Picard,
    /// Checks on the explicit blow-up solution
    Blowup {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        t_blow: Option<f64>,
        /// Finite-difference step
        #[arg(long)]
        h: Option<f64>,
    },
    /// Norm-inflation exponent of the first Picard iterate
    Inflate {
        #[arg(long)]
        kappa: Option<u32>,
        #[arg(long)]
        s: Option<f64>,
        /// Carrier frequencies, comma separated
        #[arg(long = "N", value_delimiter = ',')]
        n: Option<Vec<f64>>,
        #[arg(long)]
        eps: Option<f64>,
        /// Time window T; the supremum runs over [T/2, T]
        #[arg(long)]
        window: Option<f64>,
    },
    /// Weighted Sobolev embedding ratio sweep
    Embed {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
}

fn cap_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("MODLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MODLAB_THREADS must be a positive integer (got '{v}')"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> modlab::Result<Outcome> {
    let c = Common { config: cli.config, out: commands::out_dir(cli.out), seed: cli.seed };
    match cli.command {
        Command::PartitionCheck => commands::partition_check(&c),
        Command::Norm => commands::norm(&c),
        Command::Gabor => commands::gabor(&c),
        Command::Propagate => commands::propagate(&c),
        Command::Estimate { case } => commands::estimate(&c, &case),
        Command::Solve => commands::solve(&c),
        Command::Picard => commands::picard(&c),
        Command::Blowup { t, t_blow, h } => commands::blowup(&c, t, t_blow, h),
        Command::Inflate { kappa, s, n, eps, window } => {
            commands::inflate(&c, InflateFlags { kappa, s, n, eps, window })
        }
        Command::Embed { s, b } => commands::embed(&c, s, b),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = cap_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(o) => {
            println!("{}", o.summary);
            if o.numerical_failure {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
