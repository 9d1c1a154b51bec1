//! Eigendecomposition cache, propagator block norms and the
//! Lieb-Robinson envelopes with their empirical checks.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::hash::{Hash, Hasher};

use faer::{Mat, MatRef, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMat, C64};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Boundary, CoarseGraining, GeometryConstants, Lattice, LatticeSpec, DEFAULT_DENSE_CAP};
use crate::operators::{
    cell_rows, gather, BlockOperator, BoundReport, DecayCertificate, MajoranaOperator, SplitOperator,
};

#[derive(Debug, Clone)]
enum Vectors {
    Real(Mat<f64>),
    Complex(CMat),
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
/// block operator.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    lattice: Lattice,
    values: Vec<f64>,
    vectors: Vectors,
    source_hash: u64,
}

fn hash_matrix(m: MatRef<'_, C64>) -> u64 {
    let mut h = DefaultHasher::new();
    (m.nrows(), m.ncols()).hash(&mut h);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m.read(i, j);
            z.re.to_bits().hash(&mut h);
            z.im.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

pub(crate) fn hash_operator(h: &BlockOperator) -> u64 {
    hash_matrix(h.data())
}

/// Diagonalize a Hermitian operator. Real matrices take the real
/// symmetric path.
pub fn spectral_decompose(h: &BlockOperator) -> Result<SpectralCache> {
    h.spec().require_dense(DEFAULT_DENSE_CAP)?;
    let data = h.data();
    let source_hash = hash_matrix(data);
    let check = |values: &[f64]| {
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Decomposition("non-finite eigenvalue".into()))
        }
    };
    if dense::is_real(data) {
        let re = Mat::from_fn(data.nrows(), data.ncols(), |i, j| data.read(i, j).re);
        let evd = re.selfadjoint_eigendecomposition(Side::Lower);
        let values: Vec<f64> = (0..re.nrows()).map(|k| evd.s().column_vector().read(k)).collect();
        check(&values)?;
        return Ok(SpectralCache {
            lattice: h.lattice().clone(),
            values,
            vectors: Vectors::Real(evd.u().to_owned()),
            source_hash,
        });
    }
    let evd = data.selfadjoint_eigendecomposition(Side::Lower);
    let values: Vec<f64> = (0..data.nrows()).map(|k| evd.s().column_vector().read(k).re).collect();
    check(&values)?;
    Ok(SpectralCache {
        lattice: h.lattice().clone(),
        values,
        vectors: Vectors::Complex(evd.u().to_owned()),
        source_hash,
    })
}

/// Diagonalize the Hermitian matrix `iA` of a Majorana operator.
pub fn spectral_decompose_majorana(a: &MajoranaOperator) -> Result<SpectralCache> {
    spectral_decompose(&a.to_hermitian())
}

impl SpectralCache {
    pub fn spec(&self) -> &LatticeSpec {
        self.lattice.spec()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Entry `i` of eigenvector `k`.
    pub fn vector_entry(&self, i: usize, k: usize) -> C64 {
        match &self.vectors {
            Vectors::Real(u) => C64::new(u.read(i, k), 0.0),
            Vectors::Complex(u) => u.read(i, k),
        }
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        (0..self.dim()).map(|i| self.vector_entry(i, k)).collect()
    }

    /// Eigenvectors as a complex matrix (columns).
    pub fn eigenvectors(&self) -> CMat {
        match &self.vectors {
            Vectors::Real(u) => dense::from_real(u.as_ref()),
            Vectors::Complex(u) => u.clone(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self.vectors, Vectors::Real(_))
    }

    /// `min |ε|`: the gap around zero energy.
    pub fn gap(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |acc, e| acc.min(e.abs()))
    }

    /// `min |z − ε|` over the spectrum.
    pub fn distance_to_spectrum(&self, z: C64) -> f64 {
        self.values
            .iter()
            .fold(f64::INFINITY, |acc, &e| acc.min((z - e).norm()))
    }

    /// Selected rows of `f(H) = U diag(f(ε)) U†`.
    pub fn function_rows(&self, f: impl Fn(f64) -> C64, rows: &[usize]) -> CMat {
        let n = self.dim();
        let fv: Vec<C64> = self.values.iter().map(|&e| f(e)).collect();
        match &self.vectors {
            Vectors::Real(u) => {
                let has_re = fv.iter().any(|z| z.re != 0.0);
                let has_im = fv.iter().any(|z| z.im != 0.0);
                let part = |pick: fn(C64) -> f64| {
                    let a = Mat::from_fn(rows.len(), n, |i, k| u.read(rows[i], k) * pick(fv[k]));
                    &a * u.transpose()
                };
                let re = has_re.then(|| part(|z| z.re));
                let im = has_im.then(|| part(|z| z.im));
                Mat::from_fn(rows.len(), n, |i, j| {
                    C64::new(
                        re.as_ref().map_or(0.0, |m| m.read(i, j)),
                        im.as_ref().map_or(0.0, |m| m.read(i, j)),
                    )
                })
            }
            Vectors::Complex(u) => {
                let a = Mat::from_fn(rows.len(), n, |i, k| u.read(rows[i], k) * fv[k]);
                &a * u.adjoint()
            }
        }
    }

    /// `f(H)` as a dense matrix.
    pub fn function(&self, f: impl Fn(f64) -> C64) -> CMat {
        let rows: Vec<usize> = (0..self.dim()).collect();
        self.function_rows(f, &rows)
    }

    pub fn reconstruct(&self) -> CMat {
        self.function(|e| C64::new(e, 0.0))
    }

    /// `e^{−iHt}`.
    pub fn propagator(&self, t: f64) -> CMat {
        self.function(|e| C64::from_polar(1.0, -e * t))
    }

    /// Rows of `e^{−iHt}` belonging to `sites`.
    pub fn propagator_rows(&self, t: f64, sites: &[usize]) -> CMat {
        let rows = self.site_rows(sites);
        self.function_rows(|e| C64::from_polar(1.0, -e * t), &rows)
    }

    pub(crate) fn site_rows(&self, sites: &[usize]) -> Vec<usize> {
        let m = self.spec().internal_dim;
        sites.iter().flat_map(|&s| (0..m).map(move |a| s * m + a)).collect()
    }

    /// Block norms `‖P_r f(H) P_r′‖` for the selected pairs, computing only
    /// the rows that are needed.
    pub fn block_norms(&self, f: impl Fn(f64) -> C64, pairs: &[(usize, usize)]) -> Vec<f64> {
        let m = self.spec().internal_dim;
        let mut sites: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        sites.sort_unstable();
        sites.dedup();
        let slot: BTreeMap<usize, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let rows = self.function_rows(f, &self.site_rows(&sites));
        pairs
            .par_iter()
            .map(|&(r, rp)| {
                let blk = rows.as_ref().submatrix(slot[&r] * m, rp * m, m, m);
                dense::spectral_norm(blk)
            })
            .collect()
    }
}

/// Which site pairs a table covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    All,
    /// One reference site against every site.
    FromSite(usize),
    Explicit(Vec<(usize, usize)>),
}

impl PairSelection {
    pub fn pairs(&self, n: usize) -> Vec<(usize, usize)> {
        match self {
            PairSelection::All => (0..n).flat_map(|r| (0..n).map(move |rp| (r, rp))).collect(),
            PairSelection::FromSite(r) => (0..n).map(|rp| (*r, rp)).collect(),
            PairSelection::Explicit(p) => p.clone(),
        }
    }
}

/// `‖P_r e^{−iHt} P_r′‖` over a set of pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorTable {
    pub t: f64,
    pub pairs: Vec<(usize, usize)>,
    pub distances: Vec<f64>,
    pub norms: Vec<f64>,
}

pub fn propagator_block_norms(cache: &SpectralCache, t: f64, selection: &PairSelection) -> PropagatorTable {
    let pairs = selection.pairs(cache.lattice().len());
    let norms = cache.block_norms(|e| C64::from_polar(1.0, -e * t), &pairs);
    let distances = pairs.iter().map(|&(r, rp)| cache.lattice().distance(r, rp)).collect();
    PropagatorTable {
        t,
        pairs,
        distances,
        norms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// Polynomial-tail bound `K(t)/(D+1)^α`, defined for `|t| > t_c`.
    Theorem1,
    HastingsKoma,
    /// Minimum of every applicable envelope and 1.
    Combined,
}

/// Prefactor of the exponential Hastings-Koma bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HastingsKomaForm {
    /// `(e^{λ|t|} − 1)/(c2 (D+1)^α)`, as produced by the series argument.
    #[default]
    Derived,
    /// `(e^{λ|t|} − 1)/(D+1)^α` without the `1/c2`.
    Stated,
}

/// Lieb-Robinson envelopes for fixed constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrEnvelope {
    pub constants: GeometryConstants,
    pub hk_form: HastingsKomaForm,
}

impl LrEnvelope {
    pub fn new(constants: GeometryConstants) -> Result<Self> {
        if constants.alpha <= constants.dimension as f64 {
            return Err(Error::UnboundedRegime {
                alpha: constants.alpha,
                dimension: constants.dimension,
            });
        }
        Ok(Self {
            constants,
            hk_form: HastingsKomaForm::Derived,
        })
    }

    /// Envelope for a decay certificate, with mesh-independent `R0 = √d`.
    pub fn for_certificate(dimension: usize, cert: &DecayCertificate) -> Result<Self> {
        Self::new(GeometryConstants::scale_free(dimension, cert.alpha, cert.j)?)
    }

    pub fn with_hk_form(mut self, form: HastingsKomaForm) -> Self {
        self.hk_form = form;
        self
    }

    fn s(&self) -> f64 {
        self.constants.alpha - self.constants.dimension as f64
    }

    /// `χ_t = [c1 c2 C1 4^d (vt+R0+1)^d t]^{1/(α−d)}`.
    pub fn chi_t(&self, t: f64) -> f64 {
        let k = &self.constants;
        let d = k.dimension as f64;
        let t = t.abs();
        (k.c1 * k.c2 * k.coarse_lr_prefactor * 4f64.powf(d) * (k.v * t + k.r0 + 1.0).powf(d) * t).powf(1.0 / self.s())
    }

    /// `K(t) = e[4(⌈χ_t⌉+1)(vt+R0+1)]^α`.
    pub fn k_of_t(&self, t: f64) -> f64 {
        let k = &self.constants;
        let t = t.abs();
        E * (4.0 * (self.chi_t(t).ceil() + 1.0) * (k.v * t + k.r0 + 1.0)).powf(k.alpha)
    }

    pub fn theorem1(&self, t: f64, distance: f64) -> Result<f64> {
        let t_c = self.constants.t_c;
        if t.abs() <= t_c {
            return Err(Error::BelowCriticalTime { t, t_c });
        }
        Ok(self.k_of_t(t) / (distance + 1.0).powf(self.constants.alpha))
    }

    pub fn hastings_koma(&self, t: f64, distance: f64) -> f64 {
        let k = &self.constants;
        let delta = if distance == 0.0 { 1.0 } else { 0.0 };
        let pref = match self.hk_form {
            HastingsKomaForm::Derived => 1.0 / k.c2,
            HastingsKomaForm::Stated => 1.0,
        };
        delta + pref * (k.lambda_hk * t.abs()).exp_m1() / (distance + 1.0).powf(k.alpha)
    }

    /// `min{HK, K/(D+1)^α, 1}` above `max(t_c, 0)`, `min{HK, 1}` below.
    pub fn combined(&self, t: f64, distance: f64) -> f64 {
        let hk = self.hastings_koma(t, distance).min(1.0);
        if t.abs() <= self.constants.t_c.max(0.0) {
            hk
        } else {
            hk.min(self.k_of_t(t) / (distance + 1.0).powf(self.constants.alpha))
        }
    }

    pub fn evaluate(&self, kind: EnvelopeKind, t: f64, distance: f64) -> Result<f64> {
        match kind {
            EnvelopeKind::Theorem1 => self.theorem1(t, distance),
            EnvelopeKind::HastingsKoma => Ok(self.hastings_koma(t, distance)),
            EnvelopeKind::Combined => Ok(self.combined(t, distance)),
        }
    }

    /// Exponential-plus-tail alternative,
    /// `e^{vt − D/(χ_t+1)} + (1 − e^{−1}) K(t)/(D+1)^α`. Comparison only.
    pub fn two_term(&self, t: f64, distance: f64) -> Result<f64> {
        let tail = self.theorem1(t, distance)?;
        let k = &self.constants;
        Ok((k.v * t.abs() - distance / (self.chi_t(t) + 1.0)).exp() + (1.0 - (-1.0f64).exp()) * tail)
    }
}

/// One `(t, r, r′)` sample above its envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub r: usize,
    pub rp: usize,
    pub measured: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSample {
    pub t: f64,
    pub r: usize,
    pub rp: usize,
    pub distance: f64,
    pub measured: f64,
    pub envelope: f64,
}

impl LrSample {
    pub fn ratio(&self) -> f64 {
        self.measured / self.envelope
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrReport {
    pub samples: Vec<LrSample>,
    pub worst_ratio: f64,
    pub violations: Vec<Violation>,
}

impl LrReport {
    pub fn passed(&self) -> bool {
        !self.samples.is_empty() && self.violations.is_empty()
    }
}

/// Compare measured propagator blocks with the combined envelope of a
/// certificate at every `(t, pair)`.
///
/// The cache may come from `H` or from `iA` of a Majorana operator, in
/// which case the blocks are those of `e^{At}`.
pub fn verify_lr_bound(
    cache: &SpectralCache,
    cert: &DecayCertificate,
    times: &[f64],
    selection: &PairSelection,
) -> Result<LrReport> {
    let env = LrEnvelope::for_certificate(cache.spec().dimension, cert)?;
    let mut samples = Vec::new();
    for &t in times {
        let table = propagator_block_norms(cache, t, selection);
        for ((&(r, rp), &distance), &measured) in table.pairs.iter().zip(&table.distances).zip(&table.norms) {
            samples.push(LrSample {
                t,
                r,
                rp,
                distance,
                measured,
                envelope: env.combined(t, distance),
            });
        }
    }
    let worst_ratio = samples.iter().map(LrSample::ratio).fold(0.0, f64::max);
    let violations = samples
        .iter()
        .filter(|s| s.measured > s.envelope * (1.0 + 1e-12))
        .map(|s| Violation {
            t: s.t,
            r: s.r,
            rp: s.rp,
            measured: s.measured,
            envelope: s.envelope,
        })
        .collect();
    Ok(LrReport {
        samples,
        worst_ratio,
        violations,
    })
}

/// Coarse-grained short-range propagator bound
/// `‖P_R e^{−iH_sr t} P_R′‖ ≤ min{C2 e^{vt−|R−R′|}, 1}` over all pairs of
/// full cells and the given times.
pub fn check_sr_block_bound(
    split: &SplitOperator,
    grain: &CoarseGraining,
    k: &GeometryConstants,
    times: &[f64],
) -> Result<BoundReport> {
    if grain.chi() != split.chi {
        return Err(invalid("grain", "cell size must equal the split range"));
    }
    let cache = spectral_decompose(&split.short_range)?;
    let full: Vec<usize> = (0..grain.cells().len()).filter(|&c| !grain.is_partial(c)).collect();
    let m = cache.spec().internal_dim;
    let mut ratios = Vec::new();
    for &t in times {
        let u = cache.propagator(t);
        for &a in &full {
            let ra = cell_rows(grain, a, m);
            for &b in &full {
                let blk = gather(u.as_ref(), &ra, &cell_rows(grain, b, m));
                let lhs = dense::spectral_norm(blk.as_ref());
                let rhs = (k.coarse_sr_prefactor * (k.v * t.abs() - grain.coarse_distance(a, b)).exp()).min(1.0);
                ratios.push(lhs / rhs);
            }
        }
    }
    Ok(BoundReport::from_ratios(ratios))
}

/// Open chain of `distance + 1` sites whose only bond joins the two ends
/// with amplitude `J/(distance+1)^α`.
pub fn single_bond_model(distance: usize, j: f64, alpha: f64) -> Result<BlockOperator> {
    if distance == 0 {
        return Err(invalid("distance", "must be at least 1"));
    }
    let spec = LatticeSpec::new(1, distance + 1, Boundary::Open, 1)?;
    let amp = j / ((distance + 1) as f64).powf(alpha);
    let n = distance + 1;
    let mut data = dense::zeros(n, n);
    data.write(0, distance, C64::new(amp, 0.0));
    data.write(distance, 0, C64::new(amp, 0.0));
    BlockOperator::from_dense(spec, data)
}

/// Lower bound `2tJ/[π(D+1)^α]`, valid for `t ≤ π(D+1)^α/(2J)`.
pub fn tail_witness_lower_bound(distance: usize, j: f64, alpha: f64, t: f64) -> f64 {
    2.0 * t * j / (PI * ((distance + 1) as f64).powf(alpha))
}

/// Largest time for which the tail witness applies.
pub fn tail_witness_horizon(distance: usize, j: f64, alpha: f64) -> f64 {
    PI * ((distance + 1) as f64).powf(alpha) / (2.0 * j)
}
