//! The experiments behind each subcommand.

use std::path::PathBuf;

use lrfermion::config::ModelConfig;
use lrfermion::dense::{self, C64};
use lrfermion::dynamics::{spectral_decompose, verify_lr_bound, LrEnvelope, PairSelection};
use lrfermion::filter::{filter_fourier_check, green_filter_monotonicity, FilterKind};
use lrfermion::fit::FitWindow;
use lrfermion::lattice::Boundary;
use lrfermion::operators::{certify_alpha_decay, Impurity};
use lrfermion::spectral::{
    bound_state, clustering_reference_model, covariance_block_norms, green_blocks, reconstruct_sign_via_filter,
    verify_clustering, ClusterEnvelope, ClusterReport,
};
use lrfermion::suite::{random_decaying_model, run_suite, SuiteCheck};
use lrfermion::topo::{bloch_covariance, block_decay, gap_certificate, lambda_grid, BlochModel, KGrid};
use lrfermion::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigFile, JobKind, Pairs, UsageError};
use crate::report::{Report, Table};
use crate::row;

pub enum JobError {
    Usage(String),
    /// The computation itself failed; the report is still written.
    Numeric(String),
    Io(String),
}

impl From<UsageError> for JobError {
    fn from(e: UsageError) -> Self {
        JobError::Usage(e.0)
    }
}

impl From<Error> for JobError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidLattice(_)
            | Error::DenseCapExceeded { .. }
            | Error::UnboundedRegime { .. }
            | Error::InvalidParameter { .. }
            | Error::UnsupportedDimension(_)
            | Error::DimensionMismatch { .. }
            | Error::NotHermitian(_)
            | Error::NotAntisymmetric(_) => JobError::Usage(e.to_string()),
            _ => JobError::Numeric(e.to_string()),
        }
    }
}

impl From<csv::Error> for JobError {
    fn from(e: csv::Error) -> Self {
        JobError::Io(e.to_string())
    }
}

pub struct Job<'a> {
    pub config: &'a ConfigFile,
    pub seed: u64,
    pub out: PathBuf,
    pub report: Report,
}

impl Job<'_> {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), JobError> {
        table.write(&self.out.join(name))?;
        self.report.artifacts.push(name.to_string());
        Ok(())
    }

    fn inputs(&mut self, inputs: impl Serialize) {
        self.report.inputs = serde_json::to_value(inputs).expect("inputs serialize");
    }

    fn window(&self, side: usize) -> FitWindow {
        self.config
            .job
            .window
            .map_or_else(|| FitWindow::for_side(side), |[lo, hi]| FitWindow::new(lo, hi))
    }
}

/// Per-job default of the slope half-width.
pub fn default_slope_tolerance(kind: JobKind, config: &ConfigFile) -> Option<f64> {
    match kind {
        JobKind::Fig2 => Some([0.15, 0.15, 0.3, 0.5][config.job.dimension.unwrap_or(1).min(3)]),
        JobKind::BoundState => Some(0.25),
        JobKind::Clustering => Some(0.3),
        _ => None,
    }
}

pub fn run(kind: JobKind, job: &mut Job) -> Result<(), JobError> {
    match kind {
        JobKind::VerifyLr => verify_lr(job),
        JobKind::Clustering => clustering(job),
        JobKind::BoundState => bound_state_job(job),
        JobKind::GapScan => gap_scan(job),
        JobKind::Fig2 => fig2(job),
        JobKind::FilterCheck => filter_check(job),
        JobKind::LemmaSuite => lemma_suite(job),
    }
}

fn verify_lr(job: &mut Job) -> Result<(), JobError> {
    let cfg = &job.config.job;
    let model = job.config.model.clone().unwrap_or(ModelConfig {
        dimension: 1,
        side: 400,
        boundary: Boundary::Open,
        alpha: 2.5,
        j: 1.0,
        internal_coupling: vec![vec![1.0]],
        internal_coupling_imag: None,
        impurities: Vec::new(),
        kappa: 0.0,
    });
    let randomize = cfg.randomize.unwrap_or(false);
    let pairs = cfg.pairs.unwrap_or(Pairs::Reference);
    let h = if randomize {
        let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
        random_decaying_model(model.spec()?, model.j, model.alpha, &mut rng)?
    } else {
        model.build()?
    };
    let cert = certify_alpha_decay(&h, model.alpha);
    let env = LrEnvelope::for_certificate(model.dimension, &cert)?;
    let t_c = env.constants.t_c.max(0.0);
    let times = cfg.times.clone().unwrap_or_else(|| {
        let hi = 10f64.max(2.0 * t_c);
        (1..=8).map(|k| t_c + (hi - t_c) * k as f64 / 8.0).collect()
    });
    job.inputs(json!({ "model": model, "randomize": randomize, "pairs": pairs, "times": times }));

    let cache = spectral_decompose(&h)?;
    let selection = match pairs {
        Pairs::Reference => PairSelection::FromSite(0),
        Pairs::All => PairSelection::All,
    };
    let lr = verify_lr_bound(&cache, &cert, &times, &selection)?;
    let mut table = Table::new(&["t", "distance", "measured_norm", "envelope", "ratio"]);
    for s in &lr.samples {
        table.push(row![s.t, s.distance, s.measured, s.envelope, s.ratio()]);
    }
    job.table("verify_lr.csv", &table)?;

    let r = &mut job.report;
    r.metric("certified_J", cert.j);
    r.metric("t_c", env.constants.t_c);
    r.metric("samples", lr.samples.len() as f64);
    r.metric("violations", lr.violations.len() as f64);
    if !lr.samples.is_empty() {
        r.metric("worst_ratio", lr.worst_ratio);
    }
    r.at_most("worst_ratio", 1.0 + r.tolerances.ratio_slack);
    Ok(())
}

fn clustering_table(report: &ClusterReport) -> Table {
    let mut table = Table::new(&["distance", "block_norm", "envelope", "ratio"]);
    for s in &report.samples {
        table.push(row![s.distance, s.block_norm, s.envelope, s.ratio()]);
    }
    table
}

fn clustering(job: &mut Job) -> Result<(), JobError> {
    let cfg = &job.config.job;
    let (h, alpha, side, inputs) = match &job.config.model {
        Some(model) => {
            if cfg.side.is_some() || cfg.alpha.is_some() || cfg.j.is_some() || cfg.mu.is_some() {
                return Err(JobError::Usage(
                    "give either [model] or side/alpha/J/mu in [job], not both".into(),
                ));
            }
            (model.build()?, model.alpha, model.side, json!({ "model": model }))
        }
        None => {
            let side = cfg.side.unwrap_or(800);
            let alpha = cfg.alpha.unwrap_or(3.0);
            let j = cfg.j.unwrap_or(1.0);
            let mu = cfg.mu.unwrap_or(1.0);
            let h = clustering_reference_model(side, alpha, j, mu)?;
            (
                h,
                alpha,
                side,
                json!({ "reference_model": { "side": side, "alpha": alpha, "J": j, "mu": mu } }),
            )
        }
    };
    let [re, im] = cfg.z.unwrap_or([0.0, 0.0]);
    let z = C64::new(re, im);
    let window = job.window(side);
    job.inputs(json!({ "hamiltonian": inputs, "z": [re, im], "window": [window.lo, window.hi] }));

    let cache = spectral_decompose(&h)?;
    let cert = certify_alpha_decay(&h, alpha);
    let lr = LrEnvelope::for_certificate(h.spec().dimension, &cert)?;
    let n = h.lattice().len();
    let pairs: Vec<(usize, usize)> = (0..n).map(|r| (0, r)).collect();
    let disps: Vec<[i64; 3]> = (0..n).map(|r| h.lattice().displacement(0, r)).collect();

    let c_norms = covariance_block_norms(&cache, &pairs)?;
    let cov_env = ClusterEnvelope::covariance(lr, cache.gap())?;
    let cov = verify_clustering(
        &disps.iter().copied().zip(c_norms).collect::<Vec<_>>(),
        &cov_env,
        window,
    );
    let g = green_blocks(&cache, z, &pairs)?;
    let green_env = ClusterEnvelope::green(lr, z, g.delta_z)?;
    let green = verify_clustering(
        &disps.iter().copied().zip(g.block_norms()).collect::<Vec<_>>(),
        &green_env,
        window,
    );
    job.table("clustering_covariance.csv", &clustering_table(&cov))?;
    job.table("clustering_green.csv", &clustering_table(&green))?;

    let slope_tol = job.report.tolerances.slope();
    let slack = job.report.tolerances.ratio_slack;
    let r = &mut job.report;
    r.metric("gap", cache.gap());
    r.metric("delta_z", g.delta_z);
    r.metric("covariance_worst_ratio", cov.worst_ratio);
    r.metric("green_worst_ratio", green.worst_ratio);
    if let Some(f) = &cov.fit {
        r.metric("covariance_slope", f.slope);
    }
    if let Some(f) = &green.fit {
        r.metric("green_slope", f.slope);
    }
    r.details = json!({ "covariance_fit": cov.fit, "green_fit": green.fit });
    r.within("covariance_slope", -alpha, slope_tol);
    r.at_most("green_slope", -alpha + slope_tol);
    r.at_most("covariance_worst_ratio", 1.0 + slack);
    r.at_most("green_worst_ratio", 1.0 + slack);
    Ok(())
}

fn bound_state_job(job: &mut Job) -> Result<(), JobError> {
    let model = job.config.model.clone().unwrap_or(ModelConfig {
        dimension: 1,
        side: 2000,
        boundary: Boundary::Periodic,
        alpha: 3.0,
        j: 1.0,
        internal_coupling: vec![vec![1.0]],
        internal_coupling_imag: None,
        impurities: vec![Impurity {
            site: 0,
            potential: 3.0,
        }],
        kappa: 0.0,
    });
    if model.impurities.is_empty() {
        return Err(JobError::Usage(
            "bound-state needs at least one entry in [model] impurities".into(),
        ));
    }
    let window = job.window(model.side);
    job.inputs(json!({ "model": model, "window": [window.lo, window.hi] }));
    let clean = ModelConfig {
        impurities: Vec::new(),
        ..model.clone()
    }
    .build()?;
    let cache = spectral_decompose(&clean)?;
    let b = bound_state(&clean, &cache, &model.impurities, window)?;

    let mut table = Table::new(&["site", "|psi|"]);
    for (site, psi) in b.profile.iter().enumerate() {
        table.push(row![site, psi]);
    }
    job.table("bound_state.csv", &table)?;

    let slope_tol = job.report.tolerances.slope();
    let r = &mut job.report;
    r.metric("energy", b.energy);
    r.metric("clean_band_min", b.clean_band.0);
    r.metric("clean_band_max", b.clean_band.1);
    r.metric("residual", b.residual);
    if let Some(f) = &b.fit {
        r.metric("slope", f.slope);
    }
    r.details = json!({ "fit": b.fit });
    let ls = r.tolerances.ls_residual;
    r.at_most("residual", ls);
    r.within("slope", -model.alpha, slope_tol);
    Ok(())
}

fn gap_scan(job: &mut Job) -> Result<(), JobError> {
    let cfg = &job.config.job;
    let d = cfg.dimension.unwrap_or(1);
    let side = cfg.side.unwrap_or_else(|| [0, 100, 40, 16][d.min(3)]);
    let points = cfg.lambda_points.unwrap_or(101);
    job.inputs(json!({ "dimension": d, "side": side, "lambda_points": points }));
    let grid = KGrid::antiperiodic(d, side)?;
    let cert = gap_certificate(d, &grid, &lambda_grid(points))?;

    let mut table = Table::new(&["lambda", "min_eigenvalue_squared"]);
    for (l, v) in &cert.per_lambda {
        table.push(row![l, v]);
    }
    job.table("gap_scan.csv", &table)?;

    let r = &mut job.report;
    r.metric("min_eigenvalue_squared", cert.min_value);
    r.metric("argmin_lambda", cert.argmin_lambda);
    r.details = json!({ "argmin_k": cert.argmin_k });
    let floor = lrfermion::topo::GAP_FLOOR - r.tolerances.gap_slack;
    r.at_least("min_eigenvalue_squared", floor);
    Ok(())
}

#[derive(Serialize)]
struct Fig2Fit {
    d: usize,
    #[serde(rename = "L")]
    side: usize,
    lambda: f64,
    slope: f64,
    slope_ci: (f64, f64),
    residual: f64,
}

fn fig2(job: &mut Job) -> Result<(), JobError> {
    let cfg = &job.config.job;
    let d = cfg.dimension.unwrap_or(1);
    let side = cfg.side.unwrap_or_else(|| [0, 500, 100, 40][d.min(3)]);
    let lambdas = cfg.lambdas.clone().unwrap_or_else(|| vec![0.25, 0.5, 0.75]);
    let window = job.window(side);
    job.inputs(json!({ "dimension": d, "side": side, "lambdas": lambdas, "window": [window.lo, window.hi] }));
    let grid = KGrid::antiperiodic(d, side)?;
    let disps: Vec<[i64; 3]> = (1..=side as i64 / 2)
        .filter(|x| x % 2 == 1)
        .map(|x| [x, 0, 0])
        .collect();

    let mut table = Table::new(&["lambda", "separation", "norm"]);
    let mut fits = Vec::new();
    let slope_tol = job.report.tolerances.slope();
    for &lambda in &lambdas {
        let model = BlochModel::path(d, lambda)?;
        let blocks = bloch_covariance(&model, &grid, &disps)?;
        for (disp, block) in disps.iter().zip(&blocks) {
            table.push(row![lambda, disp[0], dense::spectral_norm(block.as_ref())]);
        }
        let key = format!("slope[lambda={lambda}]");
        match block_decay(&disps, &blocks, window) {
            Ok(fit) => {
                job.report.metric(key.clone(), fit.slope);
                fits.push(Fig2Fit {
                    d,
                    side,
                    lambda,
                    slope: fit.slope,
                    slope_ci: fit.slope_ci,
                    residual: fit.residual_rms,
                });
            }
            Err(e @ Error::TooFewPoints { .. }) => return Err(JobError::Usage(format!("window {window:?}: {e}"))),
            Err(e) => return Err(e.into()),
        }
        job.report.within(&key, -(d as f64), slope_tol);
    }
    job.table("fig2.csv", &table)?;
    job.report.details = json!({ "fits": fits });
    Ok(())
}

fn filter_check(job: &mut Job) -> Result<(), JobError> {
    let samples = job.config.job.samples.unwrap_or(20);
    let instances = job.config.job.instances.unwrap_or(10);
    job.inputs(json!({ "samples": samples, "instances": instances }));
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);

    let mut table = Table::new(&["kind", "sigma", "z_re", "z_im", "omega", "residual"]);
    let (mut erf_worst, mut green_worst, mut breaks) = (0f64, 0f64, 0usize);
    for _ in 0..samples {
        let sigma = rng.gen_range(0.2..2.0);
        let omega = rng.gen_range(-4.0..4.0);
        let res = filter_fourier_check(FilterKind::ErfSign, sigma, omega)?;
        erf_worst = erf_worst.max(res);
        table.push(row!["erf", sigma, "", "", omega, res]);

        let sigma = rng.gen_range(0.2..2.0);
        let (re, im) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let omega = rng.gen_range(-4.0..4.0);
        let res = filter_fourier_check(FilterKind::Green { re, im }, sigma, omega)?;
        green_worst = green_worst.max(res);
        table.push(row!["green", sigma, re, im, omega, res]);
        breaks += green_filter_monotonicity(sigma, C64::new(re, im), 10.0 / sigma, 400);
    }
    job.table("filter_check.csv", &table)?;

    let mut signs = Table::new(&["instance", "sigma", "gap", "error", "bound"]);
    let mut excess = f64::NEG_INFINITY;
    for k in 0..instances {
        let side = rng.gen_range(4..=10);
        let h = clustering_reference_model(
            side,
            rng.gen_range(1.5..4.0),
            rng.gen_range(0.2..1.5),
            rng.gen_range(0.3..1.5),
        )?;
        let cache = spectral_decompose(&h)?;
        let sigma = cache.gap() * rng.gen_range(0.2..1.2);
        let s = reconstruct_sign_via_filter(&cache, sigma)?;
        excess = excess.max(s.error - s.bound);
        signs.push(row![k, s.sigma, s.gap, s.error, s.bound]);
    }
    job.table("filter_sign.csv", &signs)?;

    let t = job.report.tolerances.clone();
    let r = &mut job.report;
    if samples > 0 {
        r.metric("erf_residual", erf_worst);
        r.metric("green_residual", green_worst);
        r.metric("monotonicity_breaks", breaks as f64);
        r.at_most("erf_residual", t.fourier_residual);
        r.at_most("green_residual", t.fourier_residual);
        r.at_most("monotonicity_breaks", 0.0);
    }
    if instances > 0 {
        r.metric("sign_error_excess", excess);
        r.at_most("sign_error_excess", t.sign_slack);
    }
    Ok(())
}

fn check_name(check: SuiteCheck) -> String {
    serde_json::to_value(check)
        .expect("check serializes")
        .as_str()
        .expect("unit variant")
        .to_string()
}

fn lemma_suite(job: &mut Job) -> Result<(), JobError> {
    let trials = job.config.job.trials.unwrap_or(1000);
    let checks = job
        .config
        .job
        .checks
        .clone()
        .unwrap_or_else(|| SuiteCheck::ALL.to_vec());
    job.inputs(json!({ "trials": trials, "checks": checks }));
    let suite = run_suite(&checks, trials, job.seed)?;

    let mut table = Table::new(&["check", "trials", "checked", "worst_ratio", "violations"]);
    let slack = job.report.tolerances.ratio_slack;
    for e in &suite.entries {
        let name = check_name(e.check);
        table.push(row![name, e.trials, e.checked, e.worst_ratio, e.violations]);
        if e.checked == 0 {
            continue;
        }
        let ratio = format!("worst_ratio[{name}]");
        let violations = format!("violations[{name}]");
        job.report.metric(ratio.clone(), e.worst_ratio);
        job.report.metric(violations.clone(), e.violations as f64);
        job.report.at_most(&ratio, 1.0 + slack);
        job.report.at_most(&violations, 0.0);
    }
    job.table("lemma_suite.csv", &table)?;
    Ok(())
}
