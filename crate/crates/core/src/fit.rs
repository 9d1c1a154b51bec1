//! Least-squares power-law fits on log-log axes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};

/// Minimum number of points a fit accepts.
pub const MIN_FIT_POINTS: usize = 4;

/// Residual rms (in natural-log units) above which the data are flagged as
/// not following a power law.
pub const POWER_LAW_RESIDUAL_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Separations `(x, 0, 0)` with `x > 0` odd.
    OddXAxis,
    All,
}

/// Closed separation interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl FitWindow {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `[L/20, L/4]`, clear of wrap-around effects.
    pub fn for_side(side: usize) -> Self {
        Self::new(side as f64 / 20.0, side as f64 / 4.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope.
    pub slope_ci: (f64, f64),
    pub window: FitWindow,
    pub separations: Vec<f64>,
    pub values: Vec<f64>,
    /// Residuals small enough for a power law to describe the data.
    pub power_law_consistent: bool,
}

/// Fit `log value = intercept + slope · log separation` over the window.
/// Points with non-positive values are skipped.
pub fn fit_power_law(points: &[(f64, f64)], window: FitWindow) -> Result<DecayFit> {
    if !(window.lo > 0.0 && window.hi >= window.lo) {
        return Err(invalid("window", "needs 0 < lo <= hi"));
    }
    let mut kept: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| window.contains(x) && y > 0.0 && y.is_finite())
        .collect();
    kept.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = kept.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_POINTS,
            found: n,
        });
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "all separations coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let residual_rms = (sse / nf).sqrt();
    let slope_stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(1.96);
    Ok(DecayFit {
        slope,
        intercept,
        residual_rms,
        slope_stderr,
        slope_ci: (slope - t * slope_stderr, slope + t * slope_stderr),
        window,
        separations: kept.iter().map(|p| p.0).collect(),
        values: kept.iter().map(|p| p.1).collect(),
        power_law_consistent: residual_rms <= POWER_LAW_RESIDUAL_LIMIT,
    })
}

/// Fit block norms keyed by lattice displacement.
pub fn decay_fit(samples: &[([i64; 3], f64)], selection: Selection, window: FitWindow) -> Result<DecayFit> {
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(d, _)| match selection {
            Selection::OddXAxis => d[1] == 0 && d[2] == 0 && d[0] > 0 && d[0] % 2 == 1,
            Selection::All => true,
        })
        .map(|(d, v)| (((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt(), *v))
        .collect();
    fit_power_law(&points, window)
}
