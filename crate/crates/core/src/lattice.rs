//! Hypercubic lattice geometry, coarse graining into χ-cells, and the
//! lattice-sum constants consumed by every bound.

use std::collections::HashMap;
use std::f64::consts::{E, PI};
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default row cap for dense-matrix operations.
pub const DEFAULT_DENSE_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
    Antiperiodic,
}

impl Boundary {
    pub fn wraps(self) -> bool {
        !matches!(self, Boundary::Open)
    }
}

/// Shape of a hypercubic lattice with `internal_dim` states per site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dimension: usize,
    pub side: usize,
    pub boundary: Boundary,
    pub internal_dim: usize,
}

impl LatticeSpec {
    pub fn new(dimension: usize, side: usize, boundary: Boundary, internal_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::UnsupportedDimension(dimension));
        }
        if side < 2 {
            return Err(Error::InvalidLattice(format!("side must be at least 2, got {side}")));
        }
        if internal_dim == 0 {
            return Err(Error::InvalidLattice("internal_dim must be positive".into()));
        }
        Ok(Self {
            dimension,
            side,
            boundary,
            internal_dim,
        })
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    /// Single-particle dimension `L^d · internal_dim`.
    pub fn rows(&self) -> usize {
        self.sites() * self.internal_dim
    }

    pub fn require_dense(&self, cap: usize) -> Result<()> {
        if self.rows() > cap {
            return Err(Error::DenseCapExceeded { rows: self.rows(), cap });
        }
        Ok(())
    }
}

/// Site enumeration and metric. Sites are indexed lexicographically with
/// the x coordinate running fastest; unused axes hold 0.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: LatticeSpec,
    coords: Vec<[i64; 3]>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Self {
        let l = spec.side as i64;
        let coords = (0..spec.sites())
            .map(|idx| {
                let mut c = [0i64; 3];
                let mut rest = idx as i64;
                for axis in c.iter_mut().take(spec.dimension) {
                    *axis = rest % l;
                    rest /= l;
                }
                c
            })
            .collect();
        Self { spec, coords }
    }

    /// Like [`Lattice::new`] but enforces the dense row cap.
    pub fn dense(spec: LatticeSpec, cap: usize) -> Result<Self> {
        spec.require_dense(cap)?;
        Ok(Self::new(spec))
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, site: usize) -> [i64; 3] {
        self.coords[site]
    }

    pub fn coords(&self) -> &[[i64; 3]] {
        &self.coords
    }

    /// Index of a coordinate, wrapped into the box for (anti)periodic
    /// boundaries. Returns `None` outside an open box.
    pub fn index_of(&self, coord: [i64; 3]) -> Option<usize> {
        let l = self.spec.side as i64;
        let mut idx = 0i64;
        let mut stride = 1i64;
        for &x in coord.iter().take(self.spec.dimension) {
            let x = if self.spec.boundary.wraps() {
                x.rem_euclid(l)
            } else if (0..l).contains(&x) {
                x
            } else {
                return None;
            };
            idx += x * stride;
            stride *= l;
        }
        Some(idx as usize)
    }

    /// `r′ − r`, reduced to the minimum image when the boundary wraps.
    pub fn displacement(&self, from: usize, to: usize) -> [i64; 3] {
        let (a, b) = (self.coords[from], self.coords[to]);
        let mut d = [0i64; 3];
        for axis in 0..self.spec.dimension {
            d[axis] = minimum_image(b[axis] - a[axis], self.spec.side as i64, self.spec.boundary);
        }
        d
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        norm(self.displacement(a, b))
    }
}

pub(crate) fn minimum_image(dx: i64, side: i64, boundary: Boundary) -> i64 {
    if !boundary.wraps() {
        return dx;
    }
    let mut d = dx.rem_euclid(side);
    if 2 * d > side {
        d -= side;
    }
    d
}

pub(crate) fn norm(d: [i64; 3]) -> f64 {
    ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt()
}

/// Partition of a lattice into χ-cells.
#[derive(Debug, Clone)]
pub struct CoarseGraining {
    chi: usize,
    shift: [i64; 3],
    coarse: LatticeSpec,
    coarse_coords: Vec<[i64; 3]>,
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
    partial: Vec<bool>,
    degenerate: bool,
}

impl CoarseGraining {
    /// Fixed-origin graining: cell index `⌊x/χ⌋` on every axis.
    pub fn new(lattice: &Lattice, chi: usize) -> Result<Self> {
        Self::with_shift(lattice, chi, [0; 3])
    }

    /// Graining whose mesh is shifted by `shift` sites along each axis, so
    /// the cell index is `⌊(x + shift)/χ⌋`.
    pub fn with_shift(lattice: &Lattice, chi: usize, shift: [i64; 3]) -> Result<Self> {
        let spec = *lattice.spec();
        if chi == 0 {
            return Err(invalid("chi", "must be at least 1"));
        }
        let l = spec.side as i64;
        let c = chi as i64;
        let degenerate = chi > spec.side;
        if spec.boundary.wraps() && !degenerate && spec.side % chi != 0 {
            return Err(invalid(
                "chi",
                format!("must divide L = {} under a wrapping boundary", spec.side),
            ));
        }
        let shift = if degenerate {
            [0; 3]
        } else {
            let mut s = [0; 3];
            for a in 0..spec.dimension {
                s[a] = shift[a].rem_euclid(c);
            }
            s
        };
        let coarse_side = if degenerate {
            1
        } else if spec.boundary.wraps() {
            spec.side / chi
        } else {
            (0..spec.dimension)
                .map(|a| ((l - 1 + shift[a]) / c + 1) as usize)
                .max()
                .unwrap_or(1)
        };
        let coarse = LatticeSpec {
            dimension: spec.dimension,
            side: coarse_side,
            boundary: spec.boundary,
            internal_dim: spec.internal_dim,
        };
        let n_cells = coarse_side.pow(spec.dimension as u32);
        let mut coarse_coords = vec![[0i64; 3]; n_cells];
        for (idx, cc) in coarse_coords.iter_mut().enumerate() {
            let mut rest = idx;
            for axis in cc.iter_mut().take(spec.dimension) {
                *axis = (rest % coarse_side) as i64;
                rest /= coarse_side;
            }
        }
        let mut cells = vec![Vec::new(); n_cells];
        let mut cell_of = vec![0; lattice.len()];
        for (site, x) in lattice.coords().iter().enumerate() {
            let mut idx = 0usize;
            let mut stride = 1usize;
            for a in 0..spec.dimension {
                let raw = if degenerate {
                    0
                } else if spec.boundary.wraps() {
                    (x[a] + shift[a]).rem_euclid(l) / c
                } else {
                    (x[a] + shift[a]) / c
                };
                idx += raw as usize * stride;
                stride *= coarse_side;
            }
            cells[idx].push(site);
            cell_of[site] = idx;
        }
        let full = chi.pow(spec.dimension as u32);
        let partial = cells.iter().map(|c| c.len() < full).collect();
        Ok(Self {
            chi,
            shift,
            coarse,
            coarse_coords,
            cells,
            cell_of,
            partial,
            degenerate,
        })
    }

    /// Graining with the mesh adjusted for the pair `(a, b)`: along each
    /// axis `a` sits on the cell face nearest to `b`, so that
    /// `|r_a − r_b| ≤ χ|R_a − R_b|`.
    pub fn aligned_to_pair(lattice: &Lattice, chi: usize, a: usize, b: usize) -> Result<Self> {
        let x = lattice.coord(a);
        let disp = lattice.displacement(a, b);
        let c = chi as i64;
        let mut shift = [0; 3];
        for axis in 0..lattice.spec().dimension {
            // Last slot of the cell when b lies ahead, first slot otherwise.
            let slot = if disp[axis] > 0 { c - 1 } else { 0 };
            shift[axis] = (slot - x[axis]).rem_euclid(c);
        }
        Self::with_shift(lattice, chi, shift)
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn shift(&self) -> [i64; 3] {
        self.shift
    }

    pub fn coarse_spec(&self) -> &LatticeSpec {
        &self.coarse
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of(&self, site: usize) -> usize {
        self.cell_of[site]
    }

    /// Whether the cell holds fewer than `χ^d` sites.
    pub fn is_partial(&self, cell: usize) -> bool {
        self.partial[cell]
    }

    /// `χ > L`: the whole lattice is one cell.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn coarse_coord(&self, cell: usize) -> [i64; 3] {
        self.coarse_coords[cell]
    }

    /// Distance between coarse sites in units of the coarse spacing.
    pub fn coarse_distance(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.coarse_coords[a], self.coarse_coords[b]);
        let mut d = [0i64; 3];
        for axis in 0..self.coarse.dimension {
            d[axis] = minimum_image(y[axis] - x[axis], self.coarse.side as i64, self.coarse.boundary);
        }
        norm(d)
    }

    /// `R₀ = 2χ⁻¹ max_{r∈C_R} |r − R|` with `R` the centre of a full cell,
    /// which equals `(χ−1)√d/χ`.
    pub fn r0(&self) -> f64 {
        let c = self.chi as f64;
        2.0 / c * (0.5 * (c - 1.0) * (self.coarse.dimension as f64).sqrt())
    }
}

/// Lattice constants and the bound constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub dimension: usize,
    pub alpha: f64,
    pub j: f64,
    /// Counting constant: `#{|r| ≤ ρ} ≤ b(ρ+1)^d`.
    pub b: f64,
    /// Tail constant: `Σ_{|r|≥ρ} (|r|+1)^{−α} ≤ c1/(ρ+1)^{α−d}`.
    pub c1: f64,
    pub c2: f64,
    pub r0: f64,
    /// Light-cone velocity `e·c1·J`.
    pub v: f64,
    /// Prefactor of the coarse-grained long-range block bound.
    pub coarse_lr_prefactor: f64,
    /// Prefactor of the coarse-grained short-range propagator bound.
    pub coarse_sr_prefactor: f64,
    /// Hastings-Koma rate `c2·J`.
    pub lambda_hk: f64,
    /// Time above which the polynomial envelope is defined.
    pub t_c: f64,
}

impl GeometryConstants {
    /// Assemble the derived constants from `b`, `c1` and `R0`.
    pub fn from_parts(dimension: usize, alpha: f64, j: f64, b: f64, c1: f64, r0: f64) -> Self {
        let c2 = 2f64.powf(alpha + 1.0) * (b + c1);
        let v = E * c1 * j;
        Self {
            dimension,
            alpha,
            j,
            b,
            c1,
            c2,
            r0,
            v,
            coarse_lr_prefactor: c1 * j * (r0 + 1.0 + c1.powf(-1.0 / alpha)).powf(alpha),
            coarse_sr_prefactor: r0.exp(),
            lambda_hk: c2 * j,
            t_c: (alpha - 1.0 - r0) / v,
        }
    }

    /// Constants valid for every coarse graining: `R0 = √d`, the supremum
    /// of `(χ−1)√d/χ`.
    pub fn scale_free(dimension: usize, alpha: f64, j: f64) -> Result<Self> {
        let (b, c1) = lattice_sum_constants(dimension, alpha)?;
        Ok(Self::from_parts(dimension, alpha, j, b, c1, (dimension as f64).sqrt()))
    }
}

/// Constants for a lattice, coupling and coarse graining.
pub fn geometry_constants(spec: &LatticeSpec, alpha: f64, j: f64, grain: &CoarseGraining) -> Result<GeometryConstants> {
    let (b, c1) = lattice_sum_constants(spec.dimension, alpha)?;
    Ok(GeometryConstants::from_parts(
        spec.dimension,
        alpha,
        j,
        b,
        c1,
        grain.r0(),
    ))
}

/// Exhaustive shell radius used for the lattice sums in each dimension.
fn shell_radius(d: usize) -> usize {
    match d {
        1 => 1_000_000,
        2 => 2_000,
        _ => 200,
    }
}

/// Surface area of the unit sphere and volume of the unit ball.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

/// `(ρ, multiplicity)` for every shell of Z^d with ρ ≤ shell_radius(d).
fn shells(d: usize) -> &'static [(f64, u64)] {
    static CACHE: [OnceLock<Vec<(f64, u64)>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CACHE[d - 1].get_or_init(|| {
        let r = shell_radius(d) as i64;
        let r2 = r * r;
        if d == 1 {
            return (0..=r).map(|k| (k as f64, if k == 0 { 1 } else { 2 })).collect();
        }
        let mut counts = vec![0u64; (r2 + 1) as usize];
        if d == 2 {
            for x in -r..=r {
                let rest = r2 - x * x;
                let ymax = (rest as f64).sqrt() as i64;
                for y in -ymax..=ymax {
                    counts[(x * x + y * y) as usize] += 1;
                }
            }
        } else {
            for x in -r..=r {
                for y in -r..=r {
                    let rest = r2 - x * x - y * y;
                    if rest < 0 {
                        continue;
                    }
                    let zmax = (rest as f64).sqrt() as i64;
                    for z in -zmax..=zmax {
                        counts[(x * x + y * y + z * z) as usize] += 1;
                    }
                }
            }
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(n2, &c)| ((n2 as f64).sqrt(), c))
            .collect()
    })
}

/// Upper bound on `Σ_{x∈Z^d, |x| ≥ ρ} (|x|+1)^{−α}` from integrating over
/// the unit cubes centred on those points. Needs `ρ ≥ √d`.
fn tail_integral(d: usize, alpha: f64, rho: f64) -> f64 {
    let h = 0.5 * (d as f64).sqrt();
    let u = rho - 2.0 * h + 1.0;
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..d {
        let jf = j as f64;
        acc += binom * (h - 1.0).powi((d - 1 - j) as i32) * u.powf(jf - alpha + 1.0) / (alpha - jf - 1.0);
        binom = binom * ((d - 1 - j) as f64) / (jf + 1.0);
    }
    sphere_area(d) * acc
}

/// `(b, c1)` for Z^d at decay exponent `α`; cached per `(d, α)`.
pub fn lattice_sum_constants(d: usize, alpha: f64) -> Result<(f64, f64)> {
    if !(1..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if !alpha.is_finite() || alpha <= d as f64 {
        return Err(Error::UnboundedRegime { alpha, dimension: d });
    }
    type Table = HashMap<(usize, u64), (f64, f64)>;
    static CACHE: OnceLock<Mutex<Table>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&hit) = cache.lock().expect("cache poisoned").get(&(d, alpha.to_bits())) {
        return Ok(hit);
    }
    let value = compute_lattice_sum_constants(d, alpha);
    cache
        .lock()
        .expect("cache poisoned")
        .insert((d, alpha.to_bits()), value);
    Ok(value)
}

fn compute_lattice_sum_constants(d: usize, alpha: f64) -> (f64, f64) {
    let shells = shells(d);
    let df = d as f64;
    let big_r = shell_radius(d) as f64;

    // b: counts are step functions of ρ, so the ratio peaks at shell radii.
    let mut b = ball_volume(d);
    let mut cumulative = 0u64;
    for &(rho, mult) in shells {
        cumulative += mult;
        b = b.max(cumulative as f64 / (rho + 1.0).powf(df));
    }

    // c1: the tail sum over |x| ≥ ρ is constant between shells while the
    // prefactor grows, so the supremum is attained at shell radii.
    let mut tail = tail_integral(d, alpha, big_r + 1e-9);
    let mut c1: f64 = 0.0;
    for &(rho, mult) in shells.iter().rev() {
        tail += mult as f64 / (rho + 1.0).powf(alpha);
        c1 = c1.max((rho + 1.0).powf(alpha - df) * tail);
    }
    // Beyond the exhaustive radius: bracket each step of a geometric grid.
    let mut lo = big_r;
    while lo < 1e12 {
        let hi = lo * 1.01;
        c1 = c1.max((hi + 1.0).powf(alpha - df) * tail_integral(d, alpha, lo));
        lo = hi;
    }
    c1 = c1.max(sphere_area(d) / (alpha - df));
    (b, c1)
}

/// Which lattice-sum inequality to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumCheck {
    /// Convolution of the exponential with the power law.
    Convolution,
    /// Reproducibility of `F(R) = min{[(Θ+1)/(|R|+1)]^α, 1}`.
    Reproducibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumCheckReport {
    pub trials: usize,
    pub worst_ratio: f64,
    pub violations: usize,
}

impl SumCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// `lhs/rhs` of the convolution bound for one sample, with `ξ > α − 1`.
pub fn convolution_ratio(lattice: &Lattice, constants: &GeometryConstants, r1: usize, r2: usize, xi: f64) -> f64 {
    let alpha = constants.alpha;
    let lhs: f64 = (0..lattice.len())
        .map(|r| {
            let expo = (xi - lattice.distance(r, r2)).exp().min(1.0);
            expo / (lattice.distance(r1, r) + 1.0).powf(alpha)
        })
        .sum();
    let rhs = constants.c1
        * (4.0 * (xi + 1.0) / (lattice.distance(r1, r2) + 1.0))
            .powf(alpha)
            .min(1.0);
    lhs / rhs
}

/// `lhs/rhs` of the reproducibility bound for one sample.
pub fn reproducibility_ratio(
    lattice: &Lattice,
    constants: &GeometryConstants,
    r1: usize,
    r2: usize,
    theta: f64,
) -> f64 {
    let alpha = constants.alpha;
    let f = |dist: f64| ((theta + 1.0) / (dist + 1.0)).powf(alpha).min(1.0);
    let lhs: f64 = (0..lattice.len())
        .map(|r| f(lattice.distance(r1, r)) * f(lattice.distance(r, r2)))
        .sum();
    let rhs = constants.c2 * (theta + 1.0).powf(lattice.spec().dimension as f64) * f(lattice.distance(r1, r2));
    lhs / rhs
}

/// Sample either lattice-sum inequality at random `(R1, R2, ξ|Θ)`.
///
/// Trial `k` draws from a ChaCha8 stream seeded with `seed + k`. `ξ` is
/// uniform on `(α−1, α−1+param_range]`, `Θ` on `[0, param_range]`.
pub fn check_lattice_sum_bounds(
    lattice: &Lattice,
    constants: &GeometryConstants,
    mode: SumCheck,
    trials: usize,
    param_range: f64,
    seed: u64,
) -> Result<SumCheckReport> {
    if param_range <= 0.0 {
        return Err(invalid("param_range", "must be positive"));
    }
    let n = lattice.len();
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let r1 = rng.gen_range(0..n);
            let r2 = rng.gen_range(0..n);
            let u: f64 = rng.gen_range(0.0..1.0);
            match mode {
                SumCheck::Convolution => {
                    let xi = constants.alpha - 1.0 + (1.0 - u) * param_range;
                    convolution_ratio(lattice, constants, r1, r2, xi)
                }
                SumCheck::Reproducibility => reproducibility_ratio(lattice, constants, r1, r2, u * param_range),
            }
        })
        .collect();
    Ok(SumCheckReport {
        trials,
        worst_ratio: ratios.iter().copied().fold(0.0, f64::max),
        violations: ratios.iter().filter(|&&r| r > 1.0 + 1e-12).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(d: usize, l: usize, b: Boundary) -> Lattice {
        Lattice::new(LatticeSpec::new(d, l, b, 1).unwrap())
    }

    #[test]
    fn distances() {
        assert_eq!(lattice(1, 5, Boundary::Open).distance(0, 4), 4.0);
        let sq = lattice(2, 4, Boundary::Periodic);
        let a = sq.index_of([0, 0, 0]).unwrap();
        let b = sq.index_of([3, 0, 0]).unwrap();
        assert_eq!(sq.distance(a, b), 1.0);
        assert_eq!(lattice(3, 2, Boundary::Open).len(), 8);
    }

    #[test]
    fn spec_validation() {
        assert!(LatticeSpec::new(4, 3, Boundary::Open, 1).is_err());
        assert!(LatticeSpec::new(1, 1, Boundary::Open, 1).is_err());
        assert!(LatticeSpec::new(1, 3, Boundary::Open, 0).is_err());
        let big = LatticeSpec::new(2, 101, Boundary::Open, 1).unwrap();
        assert!(matches!(
            big.require_dense(DEFAULT_DENSE_CAP),
            Err(Error::DenseCapExceeded { .. })
        ));
    }

    #[test]
    fn coarse_examples() {
        let g = CoarseGraining::new(&lattice(1, 6, Boundary::Open), 2).unwrap();
        assert_eq!(g.cells().iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 2]);
        let g = CoarseGraining::new(&lattice(2, 4, Boundary::Open), 2).unwrap();
        assert_eq!(g.cells().iter().map(Vec::len).collect::<Vec<_>>(), vec![4; 4]);
        let g = CoarseGraining::new(&lattice(1, 5, Boundary::Open), 2).unwrap();
        assert_eq!(g.cells().iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1]);
        assert_eq!(
            (0..3).map(|c| g.is_partial(c)).collect::<Vec<_>>(),
            vec![false, false, true]
        );
        let g = CoarseGraining::new(&lattice(1, 5, Boundary::Open), 9).unwrap();
        assert!(g.is_degenerate());
        assert_eq!(g.cells().len(), 1);
        assert!(CoarseGraining::new(&lattice(1, 6, Boundary::Periodic), 4).is_err());
    }

    #[test]
    fn aligned_mesh_gives_tight_pair_bound() {
        let lat = lattice(2, 12, Boundary::Open);
        for a in [0, 13, 50, 143] {
            for b in 0..lat.len() {
                let g = CoarseGraining::aligned_to_pair(&lat, 3, a, b).unwrap();
                let lhs = lat.distance(a, b);
                let rhs = 3.0 * g.coarse_distance(g.cell_of(a), g.cell_of(b));
                assert!(lhs <= rhs + 1e-12, "{a} {b}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn fixed_mesh_pair_inequalities() {
        for (d, l, chi) in [(1, 17, 4), (2, 10, 3), (3, 6, 2)] {
            let lat = lattice(d, l, Boundary::Open);
            let g = CoarseGraining::new(&lat, chi).unwrap();
            let c = chi as f64;
            for a in 0..lat.len() {
                for b in 0..lat.len() {
                    let fine = lat.distance(a, b);
                    let coarse = g.coarse_distance(g.cell_of(a), g.cell_of(b));
                    assert!(c * (coarse - g.r0()) <= fine + 1e-12);
                    assert!(fine <= c * (coarse + g.r0()) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_dimensional_constants() {
        // Oracle: direct sums Σ_{|x|≥ρ} (|x|+1)^{-2} up to |x| = 10^6 at the
        // first few shells. ρ = 0 gives π²/3 − 1, but the supremum of
        // (ρ+1)·Σ sits at ρ = 1: 2(π²/3 − 2).
        let direct = |rho: u64| -> f64 {
            let mut acc = 0.0;
            for x in (rho.max(1)..=1_000_000u64).rev() {
                acc += 2.0 / ((x + 1) as f64).powi(2);
            }
            if rho == 0 {
                acc += 1.0;
            }
            acc * (rho + 1) as f64
        };
        let oracle = (0..6).map(direct).fold(0.0, f64::max);
        assert!((direct(0) - 2.289_868).abs() < 1e-5);
        assert!((oracle - 2.579_736).abs() < 1e-5);
        let (b, c1) = lattice_sum_constants(1, 2.0).unwrap();
        assert!((c1 - 2.579_736).abs() < 1e-5, "{c1}");
        assert!(c1 >= oracle);
        assert_eq!(b, 2.0);
        let k = GeometryConstants::from_parts(1, 2.0, 1.0, b, c1, 1.0);
        assert!((k.v - 7.012_45).abs() < 1e-4, "{}", k.v);
    }

    #[test]
    fn counting_and_tail_hold_on_dense_grid() {
        for (d, alpha) in [(1usize, 1.5), (2, 2.5), (3, 3.5)] {
            let (b, c1) = lattice_sum_constants(d, alpha).unwrap();
            let r = 30i64;
            let pts: Vec<f64> = match d {
                1 => (-r..=r).map(|x| x.abs() as f64).collect(),
                2 => (-r..=r)
                    .flat_map(|x| (-r..=r).map(move |y| ((x * x + y * y) as f64).sqrt()))
                    .collect(),
                _ => (-r..=r)
                    .flat_map(|x| {
                        (-r..=r).flat_map(move |y| (-r..=r).map(move |z| ((x * x + y * y + z * z) as f64).sqrt()))
                    })
                    .collect(),
            };
            for k in 0..=200 {
                let rho = k as f64 * 0.1;
                let count = pts.iter().filter(|&&p| p <= rho).count() as f64;
                assert!(count <= b * (rho + 1.0).powi(d as i32) + 1e-9);
                // Partial tail inside the box is a lower bound of the full tail.
                let tail: f64 = pts.iter().filter(|&&p| p >= rho).map(|p| (p + 1.0).powf(-alpha)).sum();
                assert!(tail <= c1 / (rho + 1.0).powf(alpha - d as f64) + 1e-12);
            }
        }
    }

    #[test]
    fn unbounded_regime_rejected() {
        let err = lattice_sum_constants(2, 2.0).unwrap_err();
        assert!(err.to_string().contains("unbounded regime: constants diverge"));
    }

    #[test]
    fn tail_integral_bounds_direct_sum() {
        // Compare against an exhaustive sum over a shell band in d = 2.
        let alpha = 3.0;
        let rho = 50.0;
        let direct: f64 = shells(2)
            .iter()
            .filter(|(r, _)| *r >= rho)
            .map(|&(r, m)| m as f64 / (r + 1.0).powf(alpha))
            .sum::<f64>()
            + tail_integral(2, alpha, 2000.0 + 1e-9);
        assert!(tail_integral(2, alpha, rho) >= direct);
        assert!(tail_integral(2, alpha, rho) < 1.2 * direct);
    }
}
