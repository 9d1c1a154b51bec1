//! Static spectral objects: resolvent blocks, ground-state covariance
//! matrices in both formalisms, the contour representations used as
//! independent oracles, clustering envelopes and impurity bound states.

use std::f64::consts::{E, PI};

use faer::linalg::solvers::SolverCore;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMat, C64, I, ONE, ZERO};
use crate::dynamics::{spectral_decompose, LrEnvelope, SpectralCache};
use crate::error::{invalid, Error, Result};
use crate::filter::{filter_transform, FilterKind};
use crate::fit::{decay_fit, DecayFit, FitWindow, Selection};
use crate::lattice::{Boundary, LatticeSpec};
use crate::operators::{build_power_law_model, BlockOperator, Impurity};
use crate::quad::Circle;

/// Smallest admissible distance between `z` (or the Fermi level) and the
/// spectrum.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Blocks of `G(z) = (z − H)^{−1}`.
#[derive(Debug, Clone)]
pub struct GreenEvaluation {
    pub z: C64,
    /// `min_ε |z − ε| = ‖G(z)‖^{−1}`.
    pub delta_z: f64,
    pub pairs: Vec<(usize, usize)>,
    pub blocks: Vec<CMat>,
}

impl GreenEvaluation {
    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| dense::spectral_norm(b.as_ref())).collect()
    }
}

fn check_resolvent(cache: &SpectralCache, z: C64) -> Result<f64> {
    let delta = cache.distance_to_spectrum(z);
    if delta <= SINGULAR_TOL {
        return Err(Error::ResolventSingular {
            re: z.re,
            im: z.im,
            distance: delta,
        });
    }
    Ok(delta)
}

pub fn green_blocks(cache: &SpectralCache, z: C64, pairs: &[(usize, usize)]) -> Result<GreenEvaluation> {
    let delta_z = check_resolvent(cache, z)?;
    let m = cache.spec().internal_dim;
    let mut sites: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    sites.sort_unstable();
    sites.dedup();
    let rows = cache.function_rows(|e| ONE / (z - e), &cache.site_rows(&sites));
    let blocks = pairs
        .iter()
        .map(|&(r, rp)| {
            let slot = sites.binary_search(&r).expect("row computed above");
            rows.as_ref().submatrix(slot * m, rp * m, m, m).to_owned()
        })
        .collect();
    Ok(GreenEvaluation {
        z,
        delta_z,
        pairs: pairs.to_vec(),
        blocks,
    })
}

/// Full resolvent `(z − H)^{−1}` from the eigenbasis.
pub fn resolvent(cache: &SpectralCache, z: C64) -> Result<CMat> {
    check_resolvent(cache, z)?;
    Ok(cache.function(|e| ONE / (z - e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formalism {
    /// `C = (1 − sgn H)/2`.
    NumberConserving,
    /// `Γ = i sgn(iA)`, for a cache built from `iA`.
    Majorana,
}

#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub matrix: CMat,
    pub formalism: Formalism,
}

impl CovarianceMatrix {
    /// Real part; exact for the Majorana formalism.
    pub fn real(&self) -> Mat<f64> {
        Mat::from_fn(self.matrix.nrows(), self.matrix.ncols(), |i, j| {
            self.matrix.read(i, j).re
        })
    }

    pub fn block_norm(&self, m: usize, r: usize, rp: usize) -> f64 {
        dense::spectral_norm(self.matrix.as_ref().submatrix(r * m, rp * m, m, m))
    }
}

fn require_gap(cache: &SpectralCache) -> Result<()> {
    let gap = cache.gap();
    if gap <= SINGULAR_TOL {
        return Err(Error::Gapless(gap));
    }
    Ok(())
}

fn sign_weight(formalism: Formalism) -> impl Fn(f64) -> C64 {
    move |e: f64| {
        let s = e.signum();
        match formalism {
            Formalism::NumberConserving => C64::new(0.5 * (1.0 - s), 0.0),
            Formalism::Majorana => I * s,
        }
    }
}

/// Ground-state covariance from the eigenbasis.
pub fn covariance(cache: &SpectralCache, formalism: Formalism) -> Result<CovarianceMatrix> {
    require_gap(cache)?;
    Ok(CovarianceMatrix {
        matrix: cache.function(sign_weight(formalism)),
        formalism,
    })
}

/// Rows of the covariance belonging to `sites`.
pub fn covariance_rows(cache: &SpectralCache, formalism: Formalism, sites: &[usize]) -> Result<CMat> {
    require_gap(cache)?;
    Ok(cache.function_rows(sign_weight(formalism), &cache.site_rows(sites)))
}

/// `‖C_{rr′}‖` for the requested pairs.
pub fn covariance_block_norms(cache: &SpectralCache, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    require_gap(cache)?;
    Ok(cache.block_norms(sign_weight(Formalism::NumberConserving), pairs))
}

/// Relative accuracy the automatic contour aims for.
const CONTOUR_TARGET: f64 = 1e-13;
const MIN_CONTOUR_NODES: usize = 64;
const MAX_CONTOUR_NODES: usize = 1 << 15;

/// Circle enclosing every eigenvalue in `below` and none in `above`: it
/// runs from half a gap under the lowest eigenvalue to the midpoint of the
/// gap. The node count is the smallest for which the trapezoid rule
/// reproduces every pole residue to about `1e−13`.
pub fn enclosing_circle(below: &[f64], above: &[f64]) -> Result<Circle> {
    let lo = below.iter().copied().fold(f64::INFINITY, f64::min);
    let top = below.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = above.iter().copied().fold(f64::INFINITY, f64::min);
    if below.is_empty() {
        return Err(invalid("contour", "no eigenvalue to enclose"));
    }
    if bottom <= top {
        return Err(Error::Gapless(0.0));
    }
    let half = if bottom.is_finite() { 0.5 * (bottom - top) } else { 1.0 };
    let right = top + half;
    let left = lo - half;
    let center = C64::new(0.5 * (left + right), 0.0);
    let radius = 0.5 * (right - left);
    let mut nodes = MIN_CONTOUR_NODES;
    let worst = |n: usize| {
        let c = Circle {
            center,
            radius,
            nodes: n,
        };
        let inner = below
            .iter()
            .map(|&e| (c.pole_weight(C64::new(e, 0.0)) - ONE).norm())
            .fold(0.0, f64::max);
        let outer = above
            .iter()
            .map(|&e| c.pole_weight(C64::new(e, 0.0)).norm())
            .fold(0.0, f64::max);
        inner.max(outer)
    };
    while worst(nodes) > CONTOUR_TARGET && nodes < MAX_CONTOUR_NODES {
        nodes *= 2;
    }
    Ok(Circle { center, radius, nodes })
}

/// Default contour around the negative part of the spectrum.
pub fn default_circle(cache: &SpectralCache) -> Result<Circle> {
    require_gap(cache)?;
    let (neg, pos): (Vec<f64>, Vec<f64>) = cache.eigenvalues().iter().partition(|&&e| e < 0.0);
    enclosing_circle(&neg, &pos)
}

fn check_contour(values: &[f64], circle: &Circle) -> Result<()> {
    let closest = values
        .iter()
        .map(|&e| ((C64::new(e, 0.0) - circle.center).norm() - circle.radius).abs())
        .fold(f64::INFINITY, f64::min);
    if closest <= SINGULAR_TOL {
        return Err(Error::ContourCrossesSpectrum(closest));
    }
    Ok(())
}

/// `Σ_k w_k g(z_k)` for a matrix-valued integrand.
fn contour_sum(circle: &Circle, n: usize, g: impl Fn(C64) -> CMat + Sync) -> CMat {
    let nodes = circle.nodes_and_weights();
    let parts: Vec<CMat> = nodes.par_iter().map(|&(z, w)| g(z) * faer::scale(w)).collect();
    let mut acc = dense::zeros(n, n);
    for p in parts {
        acc += p;
    }
    acc
}

fn shifted_inverse(h: &CMat, z: C64) -> CMat {
    let n = h.nrows();
    let a = Mat::from_fn(n, n, |i, j| if i == j { z - h.read(i, j) } else { -h.read(i, j) });
    a.partial_piv_lu().inverse()
}

/// `∮ dz/(2πi) (z − H)^{−1}` by trapezoid quadrature with an LU solve at
/// every node. The eigenvalues are used only to reject a contour that
/// touches the spectrum.
pub fn covariance_contour(h: &BlockOperator, cache: &SpectralCache, circle: &Circle) -> Result<CovarianceMatrix> {
    check_contour(cache.eigenvalues(), circle)?;
    let data = h.data().to_owned();
    let matrix = contour_sum(circle, data.nrows(), |z| shifted_inverse(&data, z));
    Ok(CovarianceMatrix {
        matrix,
        formalism: Formalism::NumberConserving,
    })
}

/// `Γ = i·1 − (1/π)∮ dz Y(z)` with `Y(z) = (z − iA)^{−1}`, the contour
/// enclosing the negative eigenvalues of `iA`.
pub fn majorana_covariance_contour(
    ia: &BlockOperator,
    cache: &SpectralCache,
    circle: &Circle,
) -> Result<CovarianceMatrix> {
    let p = covariance_contour(ia, cache, circle)?;
    let n = p.matrix.nrows();
    // ∮ dz Y = 2πi · ∮ dz/(2πi) Y.
    let matrix = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { I } else { ZERO };
        d - 2.0 * I * p.matrix.read(i, j)
    });
    Ok(CovarianceMatrix {
        matrix,
        formalism: Formalism::Majorana,
    })
}

/// Both sides of `C_{λ′} − C_λ = ∮ dz/(2πi) G_λ(z)(H_{λ′} − H_λ)G_{λ′}(z)`.
#[derive(Debug, Clone)]
pub struct DeformationCheck {
    pub spectral_difference: CMat,
    pub contour_value: CMat,
    pub residual: f64,
    pub nodes: usize,
}

pub fn deformation_identity(h0: &BlockOperator, h1: &BlockOperator) -> Result<DeformationCheck> {
    if h0.spec() != h1.spec() {
        return Err(invalid("h1", "lattice differs from h0"));
    }
    let c0 = spectral_decompose(h0)?;
    let c1 = spectral_decompose(h1)?;
    require_gap(&c0)?;
    require_gap(&c1)?;
    let mut below = Vec::new();
    let mut above = Vec::new();
    for &e in c0.eigenvalues().iter().chain(c1.eigenvalues()) {
        if e < 0.0 {
            below.push(e);
        } else {
            above.push(e);
        }
    }
    let circle = enclosing_circle(&below, &above)?;
    check_contour(c0.eigenvalues(), &circle)?;
    check_contour(c1.eigenvalues(), &circle)?;
    let a = h0.data().to_owned();
    let b = h1.data().to_owned();
    let diff = &b - &a;
    let contour_value = contour_sum(&circle, a.nrows(), |z| {
        let g0 = shifted_inverse(&a, z);
        let g1 = shifted_inverse(&b, z);
        &(&g0 * &diff) * &g1
    });
    let p0 = covariance(&c0, Formalism::NumberConserving)?.matrix;
    let p1 = covariance(&c1, Formalism::NumberConserving)?.matrix;
    let spectral_difference = &p1 - &p0;
    let residual = dense::max_abs_diff(spectral_difference.as_ref(), contour_value.as_ref());
    Ok(DeformationCheck {
        spectral_difference,
        contour_value,
        residual,
        nodes: circle.nodes,
    })
}

/// `sgn H` rebuilt from the erf filter, eigenvalue by eigenvalue.
#[derive(Debug, Clone)]
pub struct SignReconstruction {
    pub sigma: f64,
    pub gap: f64,
    pub matrix: CMat,
    /// `max_k |F(ε_k) − sgn ε_k|`, equal to `‖F(H) − sgn H‖`.
    pub error: f64,
    /// `σ/(√π Δ) e^{−Δ²/σ²}`.
    pub bound: f64,
}

impl SignReconstruction {
    pub fn within(&self, slack: f64) -> bool {
        self.error <= self.bound + slack
    }
}

pub fn sign_error_bound(sigma: f64, gap: f64) -> f64 {
    sigma / (PI.sqrt() * gap) * (-(gap * gap) / (sigma * sigma)).exp()
}

pub fn reconstruct_sign_via_filter(cache: &SpectralCache, sigma: f64) -> Result<SignReconstruction> {
    require_gap(cache)?;
    let values = cache.eigenvalues();
    let transforms: Vec<f64> = values
        .par_iter()
        .map(|&e| filter_transform(FilterKind::ErfSign, sigma, e).map(|v| v.re))
        .collect::<Result<_>>()?;
    let error = values
        .iter()
        .zip(&transforms)
        .map(|(e, f)| (f - e.signum()).abs())
        .fold(0.0, f64::max);
    let lookup: Vec<(f64, f64)> = values.iter().copied().zip(transforms.iter().copied()).collect();
    let matrix = cache.function(|e| {
        let k = lookup.partition_point(|p| p.0 < e);
        C64::new(lookup[k.min(lookup.len() - 1)].1, 0.0)
    });
    let gap = cache.gap();
    Ok(SignReconstruction {
        sigma,
        gap,
        matrix,
        error,
        bound: sign_error_bound(sigma, gap),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "target")]
pub enum ClusterTarget {
    Covariance,
    Green { re: f64, im: f64 },
}

/// Explicit clustering envelope for covariance blocks or resolvent blocks.
#[derive(Debug, Clone, Copy)]
pub struct ClusterEnvelope {
    pub target: ClusterTarget,
    pub lr: LrEnvelope,
    /// Gap `Δ` for the covariance, `Δ(z)` for the resolvent.
    pub delta: f64,
    /// `−Im z` (zero for the covariance).
    pub gamma: f64,
    /// Riemann steps for the time integral in the resolvent envelope.
    pub steps: usize,
}

impl ClusterEnvelope {
    pub fn covariance(lr: LrEnvelope, gap: f64) -> Result<Self> {
        Self::checked(ClusterTarget::Covariance, lr, gap, 0.0)
    }

    pub fn green(lr: LrEnvelope, z: C64, delta_z: f64) -> Result<Self> {
        Self::checked(ClusterTarget::Green { re: z.re, im: z.im }, lr, delta_z, -z.im)
    }

    fn checked(target: ClusterTarget, lr: LrEnvelope, delta: f64, gamma: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("delta", "envelope diverges as the gap closes"));
        }
        let k = &lr.constants;
        if k.alpha <= k.dimension as f64 {
            return Err(Error::UnboundedRegime {
                alpha: k.alpha,
                dimension: k.dimension,
            });
        }
        Ok(Self {
            target,
            lr,
            delta,
            gamma,
            steps: 2000,
        })
    }

    /// `P(t)` of the covariance envelope.
    pub fn covariance_poly(&self, t: f64) -> f64 {
        let k = &self.lr.constants;
        let a1 = k.alpha - 1.0;
        k.v * t * self.lr.k_of_t(t) / (PI * a1)
            + (a1 * k.lambda_hk / k.v).exp() / (PI * k.c2)
            + k.v / (PI * a1 * self.delta)
            + (k.v / (2.0 * PI * a1 * self.delta)).sqrt()
            + 0.5
    }

    pub fn evaluate(&self, distance: f64) -> f64 {
        match self.target {
            ClusterTarget::Covariance => self.covariance_bound(distance),
            ClusterTarget::Green { .. } => self.green_bound(distance),
        }
    }

    fn covariance_bound(&self, distance: f64) -> f64 {
        let alpha = self.lr.constants.alpha;
        let t = 2.0 * alpha / self.delta * (distance + 1.0).ln();
        self.covariance_poly(t) / (distance + 1.0).powf(alpha)
    }

    /// Integration horizon `τ = 2√(Δ² + γ²)·(α log(D+1) + 1)/Δ²`.
    pub fn green_horizon(&self, distance: f64) -> f64 {
        let alpha = self.lr.constants.alpha;
        let lg = alpha * (distance + 1.0).ln() + 1.0;
        2.0 * (self.delta * self.delta + self.gamma * self.gamma).sqrt() * lg / (self.delta * self.delta)
    }

    /// Upper Riemann sum of `∫_0^τ B_D(t) dt`. `B_D` is nondecreasing on
    /// `[0, t_c]` and on `(t_c, ∞)`, so right endpoints on each piece give
    /// an upper bound.
    pub fn lr_time_integral(&self, distance: f64, tau: f64) -> f64 {
        let t_c = self.lr.constants.t_c.max(0.0);
        let hk = |t: f64| self.lr.hastings_koma(t, distance).min(1.0);
        let piece = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| -> f64 {
            if b <= a {
                return 0.0;
            }
            let n = self.steps.max(1);
            let h = (b - a) / n as f64;
            (1..=n).map(|i| f(a + i as f64 * h)).sum::<f64>() * h
        };
        let first = piece(0.0, tau.min(t_c), &hk);
        let second = piece(t_c, tau, &|t| self.lr.combined(t, distance));
        first + second
    }

    fn green_bound(&self, distance: f64) -> f64 {
        let alpha = self.lr.constants.alpha;
        let lg = alpha * (distance + 1.0).ln() + 1.0;
        let pow = (distance + 1.0).powf(alpha);
        let tau = self.green_horizon(distance);
        let tail_exp = 1.0 + 2.0 * self.gamma * self.gamma / (self.delta * self.delta);
        let t2 = 1.0 / (self.delta * (PI * lg).sqrt() * (E * pow).powf(tail_exp));
        let t3 = 1.0 / (E * self.delta * pow);
        self.lr_time_integral(distance, tau) + t2 + t3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSample {
    pub distance: f64,
    pub block_norm: f64,
    pub envelope: f64,
}

impl ClusterSample {
    pub fn ratio(&self) -> f64 {
        self.block_norm / self.envelope
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub samples: Vec<ClusterSample>,
    pub worst_ratio: f64,
    /// Log-log fit of the block norms, when enough points fall in the
    /// window.
    pub fit: Option<DecayFit>,
}

impl ClusterReport {
    pub fn dominated(&self) -> bool {
        !self.samples.is_empty() && self.worst_ratio <= 1.0
    }
}

/// Compare measured block norms against the envelope and fit their decay.
/// `samples` pairs each lattice displacement with a block norm.
pub fn verify_clustering(samples: &[([i64; 3], f64)], envelope: &ClusterEnvelope, window: FitWindow) -> ClusterReport {
    let rows: Vec<ClusterSample> = samples
        .par_iter()
        .map(|(d, norm)| {
            let distance = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt();
            ClusterSample {
                distance,
                block_norm: *norm,
                envelope: envelope.evaluate(distance),
            }
        })
        .collect();
    let worst_ratio = rows.iter().map(ClusterSample::ratio).fold(0.0, f64::max);
    ClusterReport {
        samples: rows,
        worst_ratio,
        fit: decay_fit(samples, Selection::All, window).ok(),
    }
}

/// Two-orbital chain used for the clustering checks: on-site `μσ_z` and
/// hopping `J/(D+1)^α σ_x`. Every band energy satisfies `|ε| ≥ μ`.
pub fn clustering_reference_model(side: usize, alpha: f64, j: f64, mu: f64) -> Result<BlockOperator> {
    let spec = LatticeSpec::new(1, side, Boundary::Periodic, 2)?;
    let sx = Mat::from_fn(2, 2, |a, b| if a != b { ONE } else { ZERO });
    let h = build_power_law_model(spec, j, alpha, sx.as_ref(), &[])?;
    let mut data = h.into_data();
    for r in 0..side {
        data.write(2 * r, 2 * r, C64::new(mu, 0.0));
        data.write(2 * r + 1, 2 * r + 1, C64::new(-mu, 0.0));
    }
    BlockOperator::from_dense(spec, data)
}

/// Impurity-induced eigenstate outside the clean spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundState {
    pub energy: f64,
    /// `[min, max]` of the clean spectrum.
    pub clean_band: (f64, f64),
    /// `|ψ(r)|` per site (norm over the internal index).
    pub profile: Vec<f64>,
    /// `‖ψ − G_clean(E)Vψ‖`.
    pub residual: f64,
    pub fit: Option<DecayFit>,
}

/// Find the bound state of `clean + V`, check the Lippmann-Schwinger fixed
/// point against the clean resolvent and fit the tail of `|ψ|` around the
/// first impurity.
pub fn bound_state(
    clean: &BlockOperator,
    clean_cache: &SpectralCache,
    impurities: &[Impurity],
    window: FitWindow,
) -> Result<BoundState> {
    if clean_cache.source_hash() != spectral_decompose_hash(clean) {
        return Err(invalid("clean_cache", "does not belong to the clean operator"));
    }
    let m = clean.internal_dim();
    let mut data = clean.data().to_owned();
    for imp in impurities {
        if imp.site >= clean.lattice().len() {
            return Err(invalid("impurities", format!("site {} outside the lattice", imp.site)));
        }
        for a in 0..m {
            let k = imp.site * m + a;
            data.write(k, k, data.read(k, k) + imp.potential);
        }
    }
    let dirty = BlockOperator::from_dense(*clean.spec(), data)?;
    let cache = spectral_decompose(&dirty)?;
    let clean_values = clean_cache.eigenvalues();
    let lo = clean_values[0];
    let hi = clean_values[clean_values.len() - 1];
    let margin = 1e-9 * hi.abs().max(lo.abs()).max(1.0);
    let outside = |e: f64| (lo - e).max(e - hi);
    let (index, energy) = cache
        .eigenvalues()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, e)| outside(e) > margin)
        .max_by(|a, b| outside(a.1).total_cmp(&outside(b.1)))
        .ok_or(Error::NoBoundState)?;
    let psi = cache.eigenvector(index);

    // (Vψ) lives on the impurity rows only.
    let mut imp_rows = Vec::new();
    let mut v_psi = Vec::new();
    for imp in impurities {
        for a in 0..m {
            let k = imp.site * m + a;
            imp_rows.push(k);
            v_psi.push(psi[k] * imp.potential);
        }
    }
    // G_clean is symmetric in the real case and Hermitian in general:
    // column k of G(E) is the conjugate of row k of G(E)† = G(E).
    let g_rows = clean_cache.function_rows(|e| C64::new(1.0 / (energy - e), 0.0), &imp_rows);
    let n = psi.len();
    let residual = (0..n)
        .map(|i| {
            let mut acc = ZERO;
            for (slot, vp) in v_psi.iter().enumerate() {
                acc += g_rows.read(slot, i).conj() * vp;
            }
            (psi[i] - acc).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();

    let lattice = clean.lattice();
    let profile: Vec<f64> = (0..lattice.len())
        .map(|r| (0..m).map(|a| psi[r * m + a].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let origin = impurities.first().map_or(0, |i| i.site);
    let samples: Vec<([i64; 3], f64)> = (0..lattice.len())
        .filter(|&r| r != origin)
        .map(|r| (lattice.displacement(origin, r), profile[r]))
        .collect();
    Ok(BoundState {
        energy,
        clean_band: (lo, hi),
        profile,
        residual,
        fit: decay_fit(&samples, Selection::All, window).ok(),
    })
}

fn spectral_decompose_hash(h: &BlockOperator) -> u64 {
    crate::dynamics::hash_operator(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> BlockOperator {
        let spec = LatticeSpec::new(1, values.len(), Boundary::Open, 1).unwrap();
        let n = values.len();
        BlockOperator::from_dense(
            spec,
            Mat::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO }),
        )
        .unwrap()
    }

    fn sigma_x(j: f64) -> BlockOperator {
        let spec = LatticeSpec::new(1, 2, Boundary::Open, 1).unwrap();
        BlockOperator::from_dense(
            spec,
            Mat::from_fn(2, 2, |i, k| if i != k { C64::new(j, 0.0) } else { ZERO }),
        )
        .unwrap()
    }

    #[test]
    fn single_site_resolvent() {
        let spec = LatticeSpec::new(1, 2, Boundary::Open, 1).unwrap();
        let h = BlockOperator::from_dense(
            spec,
            Mat::from_fn(2, 2, |i, j| if i == j { C64::new(0.5, 0.0) } else { ZERO }),
        )
        .unwrap();
        let c = spectral_decompose(&h).unwrap();
        let g = green_blocks(&c, ZERO, &[(0, 0)]).unwrap();
        assert!((g.blocks[0].read(0, 0) - C64::new(-2.0, 0.0)).norm() < 1e-15);
        assert!((g.delta_z - 0.5).abs() < 1e-15);
        let d = spectral_decompose(&diag(&[1.0, -1.0])).unwrap();
        let g = green_blocks(&d, ZERO, &[(0, 0), (1, 1), (0, 1)]).unwrap();
        assert!((g.blocks[0].read(0, 0).re + 1.0).abs() < 1e-15);
        assert!((g.blocks[1].read(0, 0).re - 1.0).abs() < 1e-15);
        assert_eq!(g.blocks[2].read(0, 0), ZERO);
        assert!(matches!(
            green_blocks(&d, C64::new(1.0, 0.0), &[(0, 0)]),
            Err(Error::ResolventSingular { .. })
        ));
    }

    #[test]
    fn diagonal_and_sigma_x_covariances() {
        let d = spectral_decompose(&diag(&[1.0, -1.0])).unwrap();
        let c = covariance(&d, Formalism::NumberConserving).unwrap();
        assert!((c.matrix.read(0, 0)).norm() < 1e-15);
        assert!((c.matrix.read(1, 1) - ONE).norm() < 1e-15);
        let s = spectral_decompose(&sigma_x(0.7)).unwrap();
        let c = covariance(&s, Formalism::NumberConserving).unwrap();
        assert!((c.matrix.read(0, 1).re + 0.5).abs() < 1e-14);
        assert!((c.matrix.read(0, 0).re - 0.5).abs() < 1e-14);
        let z = spectral_decompose(&diag(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            covariance(&z, Formalism::NumberConserving),
            Err(Error::Gapless(_))
        ));
    }

    #[test]
    fn contour_examples() {
        let h = diag(&[1.0, -1.0]);
        let c = spectral_decompose(&h).unwrap();
        let circle = Circle {
            center: C64::new(-1.0, 0.0),
            radius: 0.5,
            nodes: 64,
        };
        let got = covariance_contour(&h, &c, &circle).unwrap();
        let want = covariance(&c, Formalism::NumberConserving).unwrap();
        assert!(dense::max_abs_diff(got.matrix.as_ref(), want.matrix.as_ref()) < 1e-10);

        let empty = Circle {
            center: C64::new(5.0, 0.0),
            radius: 0.5,
            nodes: 64,
        };
        let zero = covariance_contour(&h, &c, &empty).unwrap();
        assert!(dense::max_abs(zero.matrix.as_ref()) < 1e-15);

        let crossing = Circle {
            center: C64::new(-0.5, 0.0),
            radius: 0.5,
            nodes: 64,
        };
        assert!(matches!(
            covariance_contour(&h, &c, &crossing),
            Err(Error::ContourCrossesSpectrum(_))
        ));

        let h = sigma_x(1.3);
        let c = spectral_decompose(&h).unwrap();
        let got = covariance_contour(&h, &c, &default_circle(&c).unwrap()).unwrap();
        let want = covariance(&c, Formalism::NumberConserving).unwrap();
        assert!(dense::max_abs_diff(got.matrix.as_ref(), want.matrix.as_ref()) < 1e-8);
    }

    #[test]
    fn two_mode_majorana() {
        use crate::operators::MajoranaOperator;
        // iA = −aσ_y, sgn(iA) = −σ_y, Γ = −iσ_y = [[0, −1], [1, 0]].
        let a = 0.8;
        let spec = LatticeSpec::new(1, 2, Boundary::Open, 1).unwrap();
        let op = MajoranaOperator::from_dense(
            spec,
            Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 1) => a,
                (1, 0) => -a,
                _ => 0.0,
            }),
        )
        .unwrap();
        let ia = op.to_hermitian();
        let cache = spectral_decompose(&ia).unwrap();
        let g = covariance(&cache, Formalism::Majorana).unwrap();
        assert!((g.matrix.read(0, 1) - C64::new(-1.0, 0.0)).norm() < 1e-14);
        assert!((g.matrix.read(1, 0) - C64::new(1.0, 0.0)).norm() < 1e-14);
        let via = majorana_covariance_contour(&ia, &cache, &default_circle(&cache).unwrap()).unwrap();
        assert!(dense::max_abs_diff(via.matrix.as_ref(), g.matrix.as_ref()) < 1e-8);
    }

    #[test]
    fn sign_reconstruction_examples() {
        let c = spectral_decompose(&diag(&[1.0, -1.0])).unwrap();
        let r = reconstruct_sign_via_filter(&c, 0.2).unwrap();
        assert!(r.error < 1e-8, "{}", r.error);
        let r = reconstruct_sign_via_filter(&c, 1.0).unwrap();
        assert!((r.bound - 0.564_189_583_547_756_3 * (-1.0f64).exp()).abs() < 1e-12);
        assert!(r.within(1e-8));
        let c = spectral_decompose(&sigma_x(1.0)).unwrap();
        let r = reconstruct_sign_via_filter(&c, 0.2).unwrap();
        let sgn = c.function(|e| C64::new(e.signum(), 0.0));
        assert!(dense::max_abs_diff(r.matrix.as_ref(), sgn.as_ref()) < 1e-6);
    }

    #[test]
    fn bound_state_needs_a_potential() {
        let h = build_power_law_model(
            LatticeSpec::new(1, 40, Boundary::Periodic, 1).unwrap(),
            1.0,
            3.0,
            crate::operators::scalar_coupling().as_ref(),
            &[],
        )
        .unwrap();
        let c = spectral_decompose(&h).unwrap();
        let none = bound_state(
            &h,
            &c,
            &[Impurity {
                site: 0,
                potential: 0.0,
            }],
            FitWindow::new(2.0, 10.0),
        );
        assert!(matches!(none, Err(Error::NoBoundState)));
        let b = bound_state(
            &h,
            &c,
            &[Impurity {
                site: 0,
                potential: 3.0,
            }],
            FitWindow::new(2.0, 10.0),
        )
        .unwrap();
        assert!(b.energy > b.clean_band.1);
        assert!(b.residual < 1e-10, "{}", b.residual);
    }

    #[test]
    fn envelope_decreases_at_large_distance() {
        let h = clustering_reference_model(20, 3.0, 1.0, 1.0).unwrap();
        let cert = crate::operators::certify_alpha_decay(&h, 3.0);
        let lr = LrEnvelope::for_certificate(1, &cert).unwrap();
        let cov = ClusterEnvelope::covariance(lr, 1.0).unwrap();
        let green = ClusterEnvelope::green(lr, ZERO, 1.0).unwrap();
        for env in [cov, green] {
            // The poly-log prefactor is huge; the α-power wins only far out.
            let vals: Vec<f64> = [1e10, 1e11, 1e12, 1e14].iter().map(|&d| env.evaluate(d)).collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        }
        assert!(ClusterEnvelope::covariance(lr, 0.0).is_err());
    }
}
