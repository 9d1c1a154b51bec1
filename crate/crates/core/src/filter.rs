//! Time-domain filter functions whose Fourier transforms approximate
//! `sgn(ω)` and `(z − ω)^{−1}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::dense::{C64, I};
use crate::error::{invalid, Result};
use crate::quad::{integrate, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FilterKind {
    /// `f(t) = 2i e^{−σ²t²/4}/t`, transform `erf(ω/σ)`.
    ErfSign,
    /// `f(t) = iπ e^{izt}[erf(σt/2 + γ/σ) − sgn t]` with `γ = −Im z`.
    Green { re: f64, im: f64 },
}

/// Time horizon beyond which either filter is below `e^{−37}` relative.
pub fn filter_horizon(sigma: f64) -> f64 {
    2.0 * 37f64.sqrt() / sigma
}

/// Sign filter at time `t`; the removable point `t = 0` maps to 0.
pub fn erf_filter(sigma: f64, t: f64) -> C64 {
    if t == 0.0 {
        return C64::new(0.0, 0.0);
    }
    I * (2.0 * (-0.25 * sigma * sigma * t * t).exp() / t)
}

/// `ln erfc(x)`, accurate where `erfc` itself underflows.
fn ln_erfc(x: f64) -> f64 {
    if x < 26.0 {
        erfc(x).ln()
    } else {
        let x2 = x * x;
        -x2 - (x * PI.sqrt()).ln() + (1.0 - 0.5 / x2 + 0.75 / (x2 * x2)).ln()
    }
}

/// `|f(t)| = π e^{γt}[1 − sgn(t) erf(σt/2 + γ/σ)]` for the Green filter.
pub fn green_filter_abs(sigma: f64, z: C64, t: f64) -> f64 {
    let gamma = -z.im;
    let x = 0.5 * sigma * t + gamma / sigma;
    if t > 0.0 {
        (PI.ln() + gamma * t + ln_erfc(x)).exp()
    } else if t < 0.0 {
        (PI.ln() + gamma * t + ln_erfc(-x)).exp()
    } else {
        // Mean of the one-sided limits.
        PI
    }
}

/// Green filter at time `t ≠ 0`; at `t = 0` the mean of the two one-sided
/// limits is returned.
pub fn green_filter(sigma: f64, z: C64, t: f64) -> C64 {
    let gamma = -z.im;
    if t == 0.0 {
        return I * PI * erf(gamma / sigma);
    }
    // iπ e^{izt}[erf(x) − sgn t] = −iπ sgn(t) e^{i Re z t} e^{γt} erfc(±x).
    let phase = C64::from_polar(1.0, z.re * t);
    let sign = if t > 0.0 { 1.0 } else { -1.0 };
    -I * phase * (sign * green_filter_abs(sigma, z, t))
}

/// One-sided limits `(|f(0⁺)|, |f(0⁻)|) = (π[1 − erf(γ/σ)], π[1 + erf(γ/σ)])`.
pub fn green_filter_jumps(sigma: f64, z: C64) -> (f64, f64) {
    // erfc keeps the small side accurate when |γ/σ| is large.
    let g = -z.im / sigma;
    (PI * erfc(g), PI * erfc(-g))
}

/// Closed-form transform targets.
pub fn erf_target(sigma: f64, omega: f64) -> f64 {
    erf(omega / sigma)
}

pub fn green_target(sigma: f64, z: C64, omega: f64) -> C64 {
    let w = C64::new(omega, 0.0);
    let q = (w - z).norm_sqr();
    C64::new(-(-q / (sigma * sigma)).exp_m1(), 0.0) / (z - w)
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        max_intervals: 50_000,
    }
}

/// `∫ dt/2π f(t) e^{−iωt}` by adaptive quadrature.
///
/// The sign filter is odd, so only `(2/π)∫_0^T e^{−σ²t²/4} sin(ωt)/t dt`
/// survives. The Green filter jumps at `t = 0` and is integrated on each
/// half line.
pub fn filter_transform(kind: FilterKind, sigma: f64, omega: f64) -> Result<C64> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let horizon = filter_horizon(sigma);
    match kind {
        FilterKind::ErfSign => {
            let r = integrate(
                |t| {
                    let s = if t == 0.0 { omega } else { (omega * t).sin() / t };
                    C64::new((-0.25 * sigma * sigma * t * t).exp() * s, 0.0)
                },
                0.0,
                horizon,
                quad_opts(),
            );
            Ok(r.value * (2.0 / PI))
        }
        FilterKind::Green { re, im } => {
            let z = C64::new(re, im);
            // ln|f| ≤ ln 2π + min(γt, −σ²t²/4 − γ²/σ²) on either side.
            let integrand = |t: f64| green_filter(sigma, z, t) * C64::from_polar(1.0, -omega * t);
            let neg = integrate(integrand, -horizon, 0.0, quad_opts());
            let pos = integrate(integrand, 0.0, horizon, quad_opts());
            Ok((neg.value + pos.value) / (2.0 * PI))
        }
    }
}

/// `|quadrature − closed-form target|` for one `(σ, ω)` sample.
pub fn filter_fourier_check(kind: FilterKind, sigma: f64, omega: f64) -> Result<f64> {
    let got = filter_transform(kind, sigma, omega)?;
    let want = match kind {
        FilterKind::ErfSign => C64::new(erf_target(sigma, omega), 0.0),
        FilterKind::Green { re, im } => green_target(sigma, C64::new(re, im), omega),
    };
    Ok((got - want).norm())
}

/// Check that `|f(t)|` decreases on a grid of `(0, t_max]` and increases
/// on its mirror. Returns the number of grid steps that break
/// monotonicity.
pub fn green_filter_monotonicity(sigma: f64, z: C64, t_max: f64, points: usize) -> usize {
    let step = t_max / points as f64;
    let mut breaks = 0;
    let mut prev_pos = green_filter_jumps(sigma, z).0;
    let mut prev_neg = green_filter_jumps(sigma, z).1;
    for k in 1..=points {
        let t = k as f64 * step;
        let pos = green_filter_abs(sigma, z, t);
        let neg = green_filter_abs(sigma, z, -t);
        // Values that have underflowed to zero are trivially ordered.
        if pos > prev_pos || (pos == prev_pos && pos > 0.0) {
            breaks += 1;
        }
        if neg > prev_neg || (neg == prev_neg && neg > 0.0) {
            breaks += 1;
        }
        prev_pos = pos;
        prev_neg = neg;
    }
    breaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_example() {
        let v = filter_transform(FilterKind::ErfSign, 1.0, 2.0).unwrap();
        assert!((v.re - 0.995_322_265_018_952_7).abs() < 1e-6, "{v}");
    }

    #[test]
    fn green_example() {
        // z = i: target (1 − e^{−1})/i at ω = 0.
        let target = green_target(1.0, C64::new(0.0, 1.0), 0.0);
        let want = C64::new(1.0 - (-1.0f64).exp(), 0.0) / I;
        assert!((target - want).norm() < 1e-15);
        let r = filter_fourier_check(FilterKind::Green { re: 0.0, im: 1.0 }, 1.0, 0.0).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn jumps_sum_to_two_pi() {
        for g in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let (p, m) = green_filter_jumps(0.8, C64::new(0.1, -g));
            assert!((p + m - 2.0 * PI).abs() < 1e-13);
            let eps = 1e-9;
            assert!((green_filter_abs(0.8, C64::new(0.1, -g), eps) - p).abs() < 1e-6);
            assert!((green_filter_abs(0.8, C64::new(0.1, -g), -eps) - m).abs() < 1e-6);
        }
    }

    #[test]
    fn monotone_when_one_side_is_tiny() {
        // γ/σ ≈ −9: the left jump is ~1e−36 and must not round to zero.
        let z = C64::new(1.53, 1.82);
        let (_, m) = green_filter_jumps(0.2, z);
        assert!(m > 0.0 && m < 1e-35);
        assert_eq!(green_filter_monotonicity(0.2, z, 50.0, 400), 0);
    }

    #[test]
    fn abs_matches_direct_evaluation() {
        let z = C64::new(0.4, -0.6);
        for t in [-3.0, -0.5, 0.2, 1.7] {
            let direct =
                I * PI * C64::from_polar(1.0, 0.0) * (I * z * t).exp() * (erf(0.5 * 1.3 * t - z.im / 1.3) - t.signum());
            assert!((direct - green_filter(1.3, z, t)).norm() < 1e-12);
        }
    }
}
