//! α-decaying single-particle Hamiltonians in number-conserving and
//! Majorana form, with decay certificates, the short/long-range split and
//! exponential damping.

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMat, C64, ZERO};
use crate::error::{invalid, Error, Result};
use crate::lattice::{CoarseGraining, GeometryConstants, Lattice, LatticeSpec, DEFAULT_DENSE_CAP};

/// Relative tolerance for Hermiticity and antisymmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense Hermitian matrix over (site × internal state), site-major.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    lattice: Lattice,
    data: CMat,
}

impl BlockOperator {
    /// Wrap a dense matrix, checking its size and Hermiticity.
    pub fn from_dense(spec: LatticeSpec, data: CMat) -> Result<Self> {
        let n = spec.rows();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.nrows().max(data.ncols()),
            });
        }
        let resid = dense::hermiticity_residual(data.as_ref());
        if resid > SYMMETRY_TOL * dense::frobenius(data.as_ref()).max(1.0) {
            return Err(Error::NotHermitian(resid));
        }
        Ok(Self {
            lattice: Lattice::new(spec),
            data,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        self.lattice.spec()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn data(&self) -> MatRef<'_, C64> {
        self.data.as_ref()
    }

    pub fn into_data(self) -> CMat {
        self.data
    }

    pub fn internal_dim(&self) -> usize {
        self.spec().internal_dim
    }

    /// The `internal_dim × internal_dim` block `H_{r r′}`.
    pub fn block(&self, r: usize, rp: usize) -> MatRef<'_, C64> {
        let m = self.internal_dim();
        self.data.as_ref().submatrix(r * m, rp * m, m, m)
    }

    pub fn block_norm(&self, r: usize, rp: usize) -> f64 {
        dense::spectral_norm(self.block(r, rp))
    }

    /// New operator with every block scaled by `f(r, r′)`.
    pub fn map_blocks(&self, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let m = self.internal_dim();
        let data = Mat::from_fn(self.data.nrows(), self.data.ncols(), |i, j| {
            let s = f(i / m, j / m);
            if s == 1.0 {
                self.data.read(i, j)
            } else {
                self.data.read(i, j) * s
            }
        });
        Self {
            lattice: self.lattice.clone(),
            data,
        }
    }

    /// Gap at zero energy: `min |ε|` over the spectrum.
    pub fn fermi_gap(&self) -> f64 {
        self.data
            .selfadjoint_eigenvalues(faer::Side::Lower)
            .into_iter()
            .fold(f64::INFINITY, |acc, e| acc.min(e.abs()))
    }
}

/// On-site potential `V` (times the identity on the internal space).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impurity {
    pub site: usize,
    #[serde(rename = "V")]
    pub potential: f64,
}

/// `H_{rr′} = J/(|r−r′|+1)^α · coupling` for `r ≠ r′`, plus impurities on
/// the diagonal.
///
/// Wrapping boundaries add the single wrapped image along each axis (both
/// orders of every axis combination), with a sign flip per wrapped axis
/// for antiperiodic boundaries.
pub fn build_power_law_model(
    spec: LatticeSpec,
    j: f64,
    alpha: f64,
    coupling: MatRef<'_, C64>,
    impurities: &[Impurity],
) -> Result<BlockOperator> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    let m = spec.internal_dim;
    if coupling.nrows() != m || coupling.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: coupling.nrows(),
        });
    }
    let resid = dense::hermiticity_residual(coupling);
    if resid > SYMMETRY_TOL * dense::frobenius(coupling).max(1.0) {
        return Err(Error::NotHermitian(resid));
    }
    spec.require_dense(DEFAULT_DENSE_CAP)?;
    let lattice = Lattice::new(spec);
    for imp in impurities {
        if imp.site >= lattice.len() {
            return Err(invalid("impurities", format!("site {} outside the lattice", imp.site)));
        }
    }
    let amplitudes = hopping_amplitudes(&lattice, j, alpha);
    let n = lattice.len();
    let mut data = dense::zeros(n * m, n * m);
    for r in 0..n {
        for rp in 0..n {
            if r == rp {
                continue;
            }
            let amp = amplitudes[r * n + rp];
            if amp == 0.0 {
                continue;
            }
            for a in 0..m {
                for b in 0..m {
                    data.write(r * m + a, rp * m + b, coupling.read(a, b) * amp);
                }
            }
        }
    }
    for imp in impurities {
        for a in 0..m {
            let k = imp.site * m + a;
            data.write(k, k, data.read(k, k) + imp.potential);
        }
    }
    Ok(BlockOperator { lattice, data })
}

/// Scalar hopping amplitude for every ordered site pair (row-major).
fn hopping_amplitudes(lattice: &Lattice, j: f64, alpha: f64) -> Vec<f64> {
    let spec = *lattice.spec();
    let n = lattice.len();
    let d = spec.dimension;
    let l = spec.side as i64;
    let antiperiodic = matches!(spec.boundary, crate::lattice::Boundary::Antiperiodic);
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (r, rp) = (k / n, k % n);
            if r == rp {
                return 0.0;
            }
            let (x, y) = (lattice.coord(r), lattice.coord(rp));
            let raw: Vec<i64> = (0..d).map(|a| y[a] - x[a]).collect();
            if !spec.boundary.wraps() {
                let dist = raw.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
                return j / (dist + 1.0).powf(alpha);
            }
            // Enumerate direct/wrapped choices per axis.
            let mut total = 0.0;
            for mask in 0..(1u32 << d) {
                let mut sq = 0i64;
                let mut sign = 1.0;
                let mut skip = false;
                for (a, &dx) in raw.iter().enumerate() {
                    if mask & (1 << a) != 0 {
                        if dx == 0 {
                            skip = true;
                            break;
                        }
                        let w = dx - dx.signum() * l;
                        sq += w * w;
                        if antiperiodic {
                            sign = -sign;
                        }
                    } else {
                        sq += dx * dx;
                    }
                }
                if !skip {
                    total += sign * j / ((sq as f64).sqrt() + 1.0).powf(alpha);
                }
            }
            total
        })
        .collect()
}

/// Decay constant certified by a pair scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    #[serde(rename = "J")]
    pub j: f64,
    pub alpha: f64,
    /// `J` is the smallest constant satisfying the decay condition.
    pub tight: bool,
    /// `max_r Σ_{r′} ‖H_{rr′}‖`, an upper bound on `‖H‖`.
    pub row_sum_bound: f64,
}

fn certify_blocks(lattice: &Lattice, alpha: f64, norm: impl Fn(usize, usize) -> f64 + Sync) -> DecayCertificate {
    let n = lattice.len();
    let (j, row_sum) = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut jr: f64 = 0.0;
            let mut row = 0.0;
            for rp in 0..n {
                let b = norm(r, rp);
                row += b;
                jr = jr.max(b * (lattice.distance(r, rp) + 1.0).powf(alpha));
            }
            (jr, row)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    DecayCertificate {
        j,
        alpha,
        tight: true,
        row_sum_bound: row_sum,
    }
}

/// Minimal `J` with `‖H_{rr′}‖ ≤ J/(|r−r′|+1)^α` for every pair.
pub fn certify_alpha_decay(h: &BlockOperator, alpha: f64) -> DecayCertificate {
    certify_blocks(h.lattice(), alpha, |r, rp| h.block_norm(r, rp))
}

/// Blockwise split at hopping range χ.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    pub short_range: BlockOperator,
    pub long_range: BlockOperator,
    pub chi: usize,
}

/// `H = H_sr + H_lr` with `H_sr` keeping blocks at `|r−r′| ≤ χ`.
pub fn split_range(h: &BlockOperator, chi: usize) -> Result<SplitOperator> {
    if chi == 0 {
        return Err(invalid("chi", "must be at least 1"));
    }
    let lat = h.lattice();
    let c = chi as f64;
    let short_range = h.map_blocks(|r, rp| if lat.distance(r, rp) <= c { 1.0 } else { 0.0 });
    let long_range = h.map_blocks(|r, rp| if lat.distance(r, rp) <= c { 0.0 } else { 1.0 });
    Ok(SplitOperator {
        short_range,
        long_range,
        chi,
    })
}

/// Worst ratio of a measured quantity to its bound over sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub checked: usize,
    pub worst_ratio: f64,
    pub violations: usize,
}

impl BoundReport {
    pub fn from_ratios(ratios: impl IntoIterator<Item = f64>) -> Self {
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        let mut violations = 0;
        for r in ratios {
            checked += 1;
            worst = worst.max(r);
            if r > 1.0 + 1e-12 {
                violations += 1;
            }
        }
        Self {
            checked,
            worst_ratio: worst,
            violations,
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.violations == 0
    }
}

/// Rows of the dense matrix covering the sites of a coarse cell.
pub(crate) fn cell_rows(grain: &CoarseGraining, cell: usize, m: usize) -> Vec<usize> {
    grain.cells()[cell]
        .iter()
        .flat_map(|&s| (0..m).map(move |a| s * m + a))
        .collect()
}

pub(crate) fn gather(mat: MatRef<'_, C64>, rows: &[usize], cols: &[usize]) -> CMat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| mat.read(rows[i], cols[j]))
}

/// `‖P_R H_lr P_R′‖ / [C1 χ^{−(α−d)}/(|R−R′|+1)^α]` for one coarse pair.
pub fn coarse_block_ratio(
    split: &SplitOperator,
    grain: &CoarseGraining,
    k: &GeometryConstants,
    a: usize,
    b: usize,
) -> f64 {
    let m = split.long_range.internal_dim();
    let block = gather(
        split.long_range.data(),
        &cell_rows(grain, a, m),
        &cell_rows(grain, b, m),
    );
    let lhs = dense::spectral_norm(block.as_ref());
    let rhs = k.coarse_lr_prefactor * (grain.chi() as f64).powf(-(k.alpha - k.dimension as f64))
        / (grain.coarse_distance(a, b) + 1.0).powf(k.alpha);
    lhs / rhs
}

/// Coarse-grained long-range block bound over every pair of full cells.
pub fn check_coarse_block_bound(
    split: &SplitOperator,
    grain: &CoarseGraining,
    k: &GeometryConstants,
) -> Result<BoundReport> {
    if grain.chi() != split.chi {
        return Err(invalid("grain", "cell size must equal the split range"));
    }
    let full: Vec<usize> = (0..grain.cells().len()).filter(|&c| !grain.is_partial(c)).collect();
    let pairs: Vec<(usize, usize)> = full.iter().flat_map(|&a| full.iter().map(move |&b| (a, b))).collect();
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| coarse_block_ratio(split, grain, k, a, b))
        .collect();
    Ok(BoundReport::from_ratios(ratios))
}

/// `H_κ` with blocks `e^{−κ|r−r′|} H_{rr′}`.
pub fn damp_exponential(h: &BlockOperator, kappa: f64) -> Result<BlockOperator> {
    if !(kappa >= 0.0) {
        return Err(invalid("kappa", "must be non-negative"));
    }
    if kappa == 0.0 {
        return Ok(h.clone());
    }
    let lat = h.lattice();
    Ok(h.map_blocks(|r, rp| (-kappa * lat.distance(r, rp)).exp()))
}

/// `2 c1 J |κ − κ′|^{(α−d)/(α−d+1)}`.
pub fn holder_bound(kappa: f64, kappa_p: f64, k: &GeometryConstants) -> f64 {
    let s = k.alpha - k.dimension as f64;
    2.0 * k.c1 * k.j * (kappa - kappa_p).abs().powf(s / (s + 1.0))
}

/// Largest damping that provably keeps a gap `Δ` open.
pub fn gap_safe_kappa(delta: f64, k: &GeometryConstants) -> f64 {
    let s = k.alpha - k.dimension as f64;
    (delta / (2.0 * k.c1 * k.j)).powf((s + 1.0) / s)
}

/// Dense real antisymmetric matrix over (site × Majorana index).
#[derive(Debug, Clone)]
pub struct MajoranaOperator {
    lattice: Lattice,
    data: Mat<f64>,
}

impl MajoranaOperator {
    pub fn from_dense(spec: LatticeSpec, data: Mat<f64>) -> Result<Self> {
        let n = spec.rows();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.nrows().max(data.ncols()),
            });
        }
        let mut resid = 0.0;
        let mut scale = 0.0;
        for j in 0..n {
            for i in 0..n {
                resid += (data.read(i, j) + data.read(j, i)).powi(2);
                scale += data.read(i, j).powi(2);
            }
        }
        let (resid, scale) = (resid.sqrt(), scale.sqrt());
        if resid > SYMMETRY_TOL * scale.max(1.0) {
            return Err(Error::NotAntisymmetric(resid));
        }
        Ok(Self {
            lattice: Lattice::new(spec),
            data,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        self.lattice.spec()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn data(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn block_norm(&self, r: usize, rp: usize) -> f64 {
        let m = self.spec().internal_dim;
        let blk = Mat::from_fn(m, m, |a, b| C64::new(self.data.read(r * m + a, rp * m + b), 0.0));
        dense::spectral_norm(blk.as_ref())
    }

    /// Minimal `a` with `‖A_{rr′}‖ ≤ a/(|r−r′|+1)^α`.
    pub fn certify(&self, alpha: f64) -> DecayCertificate {
        certify_blocks(&self.lattice, alpha, |r, rp| self.block_norm(r, rp))
    }

    /// The Hermitian matrix `iA`.
    pub fn to_hermitian(&self) -> BlockOperator {
        let data = Mat::from_fn(self.data.nrows(), self.data.ncols(), |i, j| {
            C64::new(0.0, self.data.read(i, j))
        });
        BlockOperator {
            lattice: self.lattice.clone(),
            data,
        }
    }
}

/// `A_{rr′} = a/(|r−r′|+1)^α · pattern` for `r < r′` (site index order),
/// `A_{r′r} = −A_{rr′}ᵀ`, and an antisymmetric on-site block.
pub fn build_majorana(
    spec: LatticeSpec,
    a: f64,
    alpha: f64,
    pattern: MatRef<'_, f64>,
    onsite: Option<MatRef<'_, f64>>,
) -> Result<MajoranaOperator> {
    let m = spec.internal_dim;
    if pattern.nrows() != m || pattern.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: pattern.nrows(),
        });
    }
    if let Some(o) = onsite {
        if o.nrows() != m || o.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: o.nrows(),
            });
        }
        let resid: f64 = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| (o.read(i, j) + o.read(j, i)).abs())
            .fold(0.0, f64::max);
        if resid > SYMMETRY_TOL {
            return Err(Error::NotAntisymmetric(resid));
        }
    }
    spec.require_dense(DEFAULT_DENSE_CAP)?;
    let lattice = Lattice::new(spec);
    let n = lattice.len();
    let mut data = Mat::<f64>::zeros(n * m, n * m);
    for r in 0..n {
        if let Some(o) = onsite {
            for i in 0..m {
                for j in 0..m {
                    data.write(r * m + i, r * m + j, o.read(i, j));
                }
            }
        }
        for rp in (r + 1)..n {
            let amp = a / (lattice.distance(r, rp) + 1.0).powf(alpha);
            for i in 0..m {
                for j in 0..m {
                    let v = amp * pattern.read(i, j);
                    data.write(r * m + i, rp * m + j, v);
                    data.write(rp * m + j, r * m + i, -v);
                }
            }
        }
    }
    MajoranaOperator::from_dense(spec, data)
}

/// Scalar coupling `1×1` matrix, the common single-band case.
pub fn scalar_coupling() -> CMat {
    Mat::from_fn(1, 1, |_, _| C64::new(1.0, 0.0))
}

/// Coupling matrix with every entry zero.
pub fn zero_coupling(m: usize) -> CMat {
    Mat::from_fn(m, m, |_, _| ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{lattice_sum_constants, Boundary};

    fn spec(d: usize, l: usize, b: Boundary) -> LatticeSpec {
        LatticeSpec::new(d, l, b, 1).unwrap()
    }

    #[test]
    fn power_law_examples() {
        let h = build_power_law_model(spec(1, 2, Boundary::Open), 1.0, 2.0, scalar_coupling().as_ref(), &[]).unwrap();
        assert_eq!(h.block(0, 1).read(0, 0).re, 0.25);
        let h = build_power_law_model(
            spec(1, 4, Boundary::Periodic),
            1.0,
            2.0,
            scalar_coupling().as_ref(),
            &[],
        )
        .unwrap();
        assert_eq!(h.block(0, 1).read(0, 0).re, 0.3125);
        let imp = [Impurity {
            site: 0,
            potential: 3.0,
        }];
        let h = build_power_law_model(
            spec(1, 4, Boundary::Periodic),
            1.0,
            2.0,
            scalar_coupling().as_ref(),
            &imp,
        )
        .unwrap();
        assert_eq!(h.block(0, 0).read(0, 0).re, 3.0);
    }

    #[test]
    fn antiperiodic_image_sign() {
        let h = build_power_law_model(
            spec(1, 4, Boundary::Antiperiodic),
            1.0,
            2.0,
            scalar_coupling().as_ref(),
            &[],
        )
        .unwrap();
        assert_eq!(h.block(0, 1).read(0, 0).re, 0.25 - 0.0625);
    }

    #[test]
    fn rejects_non_hermitian_coupling() {
        let s = LatticeSpec::new(1, 3, Boundary::Open, 2).unwrap();
        let c = Mat::from_fn(2, 2, |i, j| C64::new(if i < j { 1.0 } else { 0.0 }, 0.0));
        assert!(matches!(
            build_power_law_model(s, 1.0, 2.0, c.as_ref(), &[]),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn certificate_examples() {
        let h = build_power_law_model(spec(1, 40, Boundary::Open), 1.0, 2.0, scalar_coupling().as_ref(), &[]).unwrap();
        let cert = certify_alpha_decay(&h, 2.0);
        assert!((cert.j - 1.0).abs() < 1e-14);
        let (_, c1) = lattice_sum_constants(1, 2.0).unwrap();
        assert!(cert.row_sum_bound <= c1);
        // Certifying at a faster decay costs a J growing with L.
        let small = certify_alpha_decay(
            &build_power_law_model(spec(1, 20, Boundary::Open), 1.0, 2.0, scalar_coupling().as_ref(), &[]).unwrap(),
            3.0,
        );
        assert!((small.j - 20.0).abs() < 1e-12, "{}", small.j);
        assert!((certify_alpha_decay(&h, 3.0).j - 40.0).abs() < 1e-12);
    }

    #[test]
    fn split_examples() {
        let h = build_power_law_model(spec(1, 10, Boundary::Open), 1.0, 2.0, scalar_coupling().as_ref(), &[]).unwrap();
        let s = split_range(&h, 2).unwrap();
        assert_eq!(s.long_range.block(0, 3).read(0, 0).re, 1.0 / 16.0);
        assert_eq!(s.short_range.block(0, 3).read(0, 0).re, 0.0);
        let s = split_range(&h, 10).unwrap();
        assert_eq!(dense::max_abs(s.long_range.data()), 0.0);
    }

    #[test]
    fn damping_zero_is_identity() {
        let h = build_power_law_model(
            spec(1, 8, Boundary::Periodic),
            1.0,
            2.5,
            scalar_coupling().as_ref(),
            &[],
        )
        .unwrap();
        let d = damp_exponential(&h, 0.0).unwrap();
        assert_eq!(dense::max_abs_diff(h.data(), d.data()), 0.0);
        assert!(damp_exponential(&h, -0.1).is_err());
    }

    #[test]
    fn gap_safe_kappa_example() {
        let k = GeometryConstants::scale_free(1, 2.0, 1.0).unwrap();
        let kappa = gap_safe_kappa(0.5, &k);
        assert!((kappa - (0.5 / (2.0 * k.c1)).powi(2)).abs() < 1e-15);
        // c1 = 2(π²/3 − 2) in d = 1 at α = 2.
        assert!((kappa - 0.009_391).abs() < 1e-5, "{kappa}");
        assert_eq!(holder_bound(0.3, 0.3, &k), 0.0);
    }

    #[test]
    fn majorana_examples() {
        let s = spec(1, 2, Boundary::Open);
        let one = Mat::from_fn(1, 1, |_, _| 1.0);
        let a = build_majorana(s, 1.0, 2.0, one.as_ref(), None).unwrap();
        assert_eq!(a.data().read(0, 1), 0.25);
        assert_eq!(a.data().read(1, 0), -0.25);
        let zero = MajoranaOperator::from_dense(s, Mat::zeros(2, 2)).unwrap();
        assert_eq!(zero.certify(2.0).j, 0.0);
        let bad = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 });
        assert!(matches!(
            MajoranaOperator::from_dense(s, bad),
            Err(Error::NotAntisymmetric(_))
        ));
    }
}
