//! Job configuration files.
//!
//! ```toml
//! [job]
//! kind = "fig2"
//! seed = 7
//! dimension = 1
//! side = 500
//!
//! [model]          # jobs that act on a power-law Hamiltonian
//! dimension = 1
//! side = 400
//! boundary = "open"
//! alpha = 2.5
//! J = 1.0
//!
//! [tolerances]
//! slope = 0.15
//! ```

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lrfermion::config::ModelConfig;
use lrfermion::suite::SuiteCheck;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    VerifyLr,
    Clustering,
    BoundState,
    GapScan,
    Fig2,
    FilterCheck,
    LemmaSuite,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::VerifyLr => "verify-lr",
            JobKind::Clustering => "clustering",
            JobKind::BoundState => "bound-state",
            JobKind::GapScan => "gap-scan",
            JobKind::Fig2 => "fig2",
            JobKind::FilterCheck => "filter-check",
            JobKind::LemmaSuite => "lemma-suite",
        }
    }

    /// Keys of `[job]` the job reads, besides `kind`, `seed` and `out`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            JobKind::VerifyLr => &["times", "pairs", "randomize"],
            JobKind::Clustering => &["side", "alpha", "J", "mu", "z", "window"],
            JobKind::BoundState => &["window"],
            JobKind::GapScan => &["dimension", "side", "lambda_points"],
            JobKind::Fig2 => &["dimension", "side", "lambdas", "window"],
            JobKind::FilterCheck => &["samples", "instances"],
            JobKind::LemmaSuite => &["trials", "checks"],
        }
    }

    fn reads_model(self) -> bool {
        matches!(self, JobKind::VerifyLr | JobKind::Clustering | JobKind::BoundState)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairs {
    /// Site 0 against every site.
    Reference,
    All,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSection {
    pub kind: Option<JobKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dimension: Option<usize>,
    pub side: Option<usize>,
    pub alpha: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub mu: Option<f64>,
    /// Green's-function evaluation point `[re, im]`.
    pub z: Option<[f64; 2]>,
    pub times: Option<Vec<f64>>,
    pub pairs: Option<Pairs>,
    pub randomize: Option<bool>,
    pub lambdas: Option<Vec<f64>>,
    pub lambda_points: Option<usize>,
    /// Fit window `[lo, hi]` in lattice units.
    pub window: Option<[f64; 2]>,
    pub samples: Option<usize>,
    pub instances: Option<usize>,
    pub trials: Option<usize>,
    pub checks: Option<Vec<SuiteCheck>>,
}

/// Acceptance tolerances. `slope` has a per-job default and is filled in
/// before the job runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative slack on every `measured ≤ bound` comparison.
    pub ratio_slack: f64,
    /// Half-width of the accepted slope window.
    pub slope: Option<f64>,
    /// Lippmann-Schwinger residual of a bound state.
    pub ls_residual: f64,
    /// Fourier-transform residual of the filter functions.
    pub fourier_residual: f64,
    /// Slack on the sign-reconstruction error bound.
    pub sign_slack: f64,
    /// Slack below the gap floor 1/2.
    pub gap_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ratio_slack: 1e-12,
            slope: None,
            ls_residual: 1e-8,
            fourier_residual: 1e-6,
            sign_slack: 1e-8,
            gap_slack: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            ratio_slack: self.ratio_slack * factor,
            slope: self.slope.map(|s| s * factor),
            ls_residual: self.ls_residual * factor,
            fourier_residual: self.fourier_residual * factor,
            sign_slack: self.sign_slack * factor,
            gap_slack: self.gap_slack * factor,
        }
    }

    pub fn slope(&self) -> f64 {
        self.slope.expect("slope tolerance resolved before the job runs")
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub job: JobSection,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Problems with the command line or the configuration, reported with exit
/// status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(e.to_string().trim_end().to_string()))
    }

    /// Reject keys the selected job would silently ignore.
    pub fn check_for(&self, kind: JobKind) -> Result<(), UsageError> {
        if let Some(k) = self.job.kind {
            if k != kind {
                return Err(UsageError(format!(
                    "[job] kind = \"{}\" does not match the subcommand `{}`",
                    k.name(),
                    kind.name()
                )));
            }
        }
        let section = serde_json::to_value(&self.job).expect("job section serializes");
        let allowed = kind.keys();
        for (key, value) in section.as_object().expect("job section is a table") {
            if value.is_null() || matches!(key.as_str(), "kind" | "seed" | "out") {
                continue;
            }
            if !allowed.contains(&key.as_str()) {
                return Err(UsageError(format!(
                    "[job] key `{key}` is not used by `{}` (accepted: {})",
                    kind.name(),
                    allowed.join(", ")
                )));
            }
        }
        if self.model.is_some() && !kind.reads_model() {
            return Err(UsageError(format!("`{}` does not read a [model] section", kind.name())));
        }
        Ok(())
    }
}
