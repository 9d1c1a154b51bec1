//! `lrfermion`: run one experiment, write CSV tables and a JSON report.
//!
//! Exit status: 0 when every acceptance rule passes, 1 on a numerical
//! failure, 2 on a usage or configuration error.

mod config;
mod jobs;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ConfigFile, JobKind, UsageError};
use jobs::{Job, JobError};
use report::Report;

/// Output directory override; the only setting read from the environment.
const OUT_ENV: &str = "LRFERMION_OUT";

#[derive(Parser)]
#[command(name = "lrfermion", version, about = "Long-range free-fermion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML job configuration with [job], [model] and [tolerances] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $LRFERMION_OUT, then [job] out, then ./lrfermion-out/<job>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for every randomized sample; overrides [job] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Multiply every tolerance by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Propagator blocks against the Lieb-Robinson envelope.
    VerifyLr,
    /// Covariance and Green's-function decay against the clustering envelopes.
    Clustering,
    /// Impurity bound state and its power-law tail.
    BoundState,
    /// Gap certificate of the interpolation path.
    GapScan,
    /// Ground-state covariance decay along the interpolation path.
    Fig2,
    /// Fourier identities of the filter functions and sign reconstruction.
    FilterCheck,
    /// Randomized coarse-graining, lattice-sum and Hölder checks.
    LemmaSuite,
}

impl Command {
    fn kind(self) -> JobKind {
        match self {
            Command::VerifyLr => JobKind::VerifyLr,
            Command::Clustering => JobKind::Clustering,
            Command::BoundState => JobKind::BoundState,
            Command::GapScan => JobKind::GapScan,
            Command::Fig2 => JobKind::Fig2,
            Command::FilterCheck => JobKind::FilterCheck,
            Command::LemmaSuite => JobKind::LemmaSuite,
        }
    }
}

const DEFAULT_SEED: u64 = 2024;

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.command.kind();

    let config = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(c) => c,
            Err(e) => return usage(e),
        },
        None => ConfigFile::default(),
    };
    if let Err(e) = config.check_for(kind) {
        return usage(e);
    }
    if !(cli.tolerance_scale > 0.0 && cli.tolerance_scale.is_finite()) {
        return usage("--tolerance-scale must be a positive number");
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return usage(format!("cannot size the thread pool: {e}"));
        }
    }

    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| config.job.out.clone())
        .unwrap_or_else(|| PathBuf::from("lrfermion-out").join(kind.name()));
    if let Err(e) = std::fs::create_dir_all(&out) {
        return usage(UsageError(format!("cannot create {}: {e}", out.display())));
    }

    let mut tolerances = config.tolerances.clone();
    if tolerances.slope.is_none() {
        tolerances.slope = jobs::default_slope_tolerance(kind, &config);
    }
    let tolerances = tolerances.scaled(cli.tolerance_scale);
    let seed = cli.seed.or(config.job.seed).unwrap_or(DEFAULT_SEED);
    let mut job = Job {
        config: &config,
        seed,
        out: out.clone(),
        report: Report::new(kind, seed, tolerances, cli.tolerance_scale),
    };

    let start = Instant::now();
    let outcome = jobs::run(kind, &mut job);
    let wall = start.elapsed().as_secs_f64();
    match outcome {
        Ok(()) => job.report.finish(),
        Err(JobError::Usage(msg)) => return usage(msg),
        Err(JobError::Io(msg)) => return usage(format!("cannot write output: {msg}")),
        Err(JobError::Numeric(msg)) => job.report.abort(msg),
    }

    let report = &job.report;
    let timing = serde_json::json!({ "job": kind.name(), "wall_seconds": wall });
    let written = report
        .write(&out)
        .and_then(|()| std::fs::write(out.join("timing.json"), format!("{timing:#}\n")));
    if let Err(e) = written {
        return usage(format!("cannot write report to {}: {e}", out.display()));
    }

    let status = if report.pass { "PASS" } else { "FAIL" };
    match &report.reason {
        Some(reason) => println!("{}: {status} ({reason})", kind.name()),
        None => println!("{}: {status}", kind.name()),
    }
    println!("report: {}", out.join("report.json").display());
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
