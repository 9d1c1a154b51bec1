//! Bloch-space models for the topological interpolation path: Clifford
//! generators, Dirac and flattened-Dirac Hamiltonians, the gap
//! certificate and momentum sums for real-space blocks.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMat, C64, I, ONE, ZERO};
use crate::error::{invalid, Error, Result};
use crate::fit::{decay_fit, DecayFit, FitWindow, Selection};
use crate::lattice::{Boundary, Lattice, LatticeSpec, DEFAULT_DENSE_CAP};
use crate::operators::BlockOperator;

/// Mutually anticommuting Hermitian generators `Γ_0 … Γ_d`.
#[derive(Debug, Clone)]
pub struct CliffordSet {
    dimension: usize,
    gammas: Vec<CMat>,
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (p, q) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * p, a.ncols() * q, |i, j| {
        a.read(i / p, j / q) * b.read(i % p, j % q)
    })
}

fn pauli() -> [CMat; 4] {
    let m = |e: [[C64; 2]; 2]| Mat::from_fn(2, 2, |i, j| e[i][j]);
    [
        m([[ONE, ZERO], [ZERO, ONE]]),
        m([[ZERO, ONE], [ONE, ZERO]]),
        m([[ZERO, -I], [I, ZERO]]),
        m([[ONE, ZERO], [ZERO, -ONE]]),
    ]
}

/// `d = 1`: `σ_z, σ_x`; `d = 2` adds `σ_y`; `d = 3`: `τ_z ⊗ 1` and
/// `τ_x ⊗ σ_i`.
pub fn clifford(dimension: usize) -> Result<CliffordSet> {
    let [id, sx, sy, sz] = pauli();
    let gammas = match dimension {
        1 => vec![sz, sx],
        2 => vec![sz, sx, sy],
        3 => vec![kron(&sz, &id), kron(&sx, &sx), kron(&sx, &sy), kron(&sx, &sz)],
        d => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(CliffordSet { dimension, gammas })
}

impl CliffordSet {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Size of each generator.
    pub fn size(&self) -> usize {
        self.gammas[0].nrows()
    }

    pub fn gammas(&self) -> &[CMat] {
        &self.gammas
    }

    /// `Σ_μ n_μ Γ_μ`.
    pub fn combine(&self, coefficients: &[f64]) -> CMat {
        let s = self.size();
        Mat::from_fn(s, s, |i, j| {
            coefficients
                .iter()
                .zip(&self.gammas)
                .fold(ZERO, |acc, (&c, g)| acc + g.read(i, j) * c)
        })
    }

    /// Largest entry of `{Γ_μ, Γ_ν} − 2δ_{μν}` over all pairs.
    pub fn anticommutator_residual(&self) -> f64 {
        let s = self.size();
        let mut worst = 0.0_f64;
        for (mu, a) in self.gammas.iter().enumerate() {
            for (nu, b) in self.gammas.iter().enumerate() {
                let anti = &(a * b) + &(b * a);
                for i in 0..s {
                    for j in 0..s {
                        let want = if mu == nu && i == j { 2.0 } else { 0.0 };
                        worst = worst.max((anti.read(i, j) - want).norm());
                    }
                }
            }
        }
        worst
    }
}

/// `√(Σ sin² k_μ)` below which the flattened model is undefined.
pub const SINGULAR_MOMENTUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BlochKind {
    /// `Σ sin k_μ Γ_μ − (Σ cos k_μ − m)Γ_0`.
    Dirac { mass: f64 },
    /// `Σ sin k_μ Γ_μ / √(Σ sin² k_μ)`.
    FlattenedDirac,
    /// `Γ_0 → h_fD → h_Topo` with `h_Topo` the Dirac model at `m = d − 1`.
    Path { lambda: f64 },
    /// k-independent `Σ_μ n_μ Γ_μ`.
    Custom { coefficients: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct BlochModel {
    pub kind: BlochKind,
    clifford: CliffordSet,
}

impl BlochModel {
    pub fn new(dimension: usize, kind: BlochKind) -> Result<Self> {
        let clifford = clifford(dimension)?;
        match &kind {
            BlochKind::Path { lambda } if !(0.0..=1.0).contains(lambda) => {
                return Err(invalid("lambda", "must lie in [0, 1]"));
            }
            BlochKind::Custom { coefficients } if coefficients.len() != dimension + 1 => {
                return Err(invalid("coefficients", format!("expected {} entries", dimension + 1)));
            }
            _ => {}
        }
        Ok(Self { kind, clifford })
    }

    pub fn dirac(dimension: usize, mass: f64) -> Result<Self> {
        Self::new(dimension, BlochKind::Dirac { mass })
    }

    pub fn flattened_dirac(dimension: usize) -> Result<Self> {
        Self::new(dimension, BlochKind::FlattenedDirac)
    }

    pub fn path(dimension: usize, lambda: f64) -> Result<Self> {
        Self::new(dimension, BlochKind::Path { lambda })
    }

    pub fn dimension(&self) -> usize {
        self.clifford.dimension
    }

    pub fn clifford(&self) -> &CliffordSet {
        &self.clifford
    }

    pub fn internal_dim(&self) -> usize {
        self.clifford.size()
    }

    /// Coefficients `n_μ(k)` on `Γ_0 … Γ_d`.
    pub fn coefficients(&self, k: &[f64]) -> Result<Vec<f64>> {
        let d = self.dimension();
        if k.len() < d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: k.len(),
            });
        }
        let dirac = |mass: f64| {
            let mut n = vec![0.0; d + 1];
            n[0] = mass - k[..d].iter().map(|x| x.cos()).sum::<f64>();
            for mu in 0..d {
                n[mu + 1] = k[mu].sin();
            }
            n
        };
        let flat = || -> Result<Vec<f64>> {
            let norm = k[..d].iter().map(|x| x.sin().powi(2)).sum::<f64>().sqrt();
            if norm < SINGULAR_MOMENTUM_TOL {
                return Err(Error::SingularMomentum);
            }
            let mut n = vec![0.0; d + 1];
            for mu in 0..d {
                n[mu + 1] = k[mu].sin() / norm;
            }
            Ok(n)
        };
        match &self.kind {
            BlochKind::Dirac { mass } => Ok(dirac(*mass)),
            BlochKind::FlattenedDirac => flat(),
            BlochKind::Path { lambda } => {
                let l = *lambda;
                let fd = flat()?;
                if l <= 0.5 {
                    let mut n: Vec<f64> = fd.iter().map(|x| 2.0 * l * x).collect();
                    n[0] += 1.0 - 2.0 * l;
                    Ok(n)
                } else {
                    let topo = dirac(d as f64 - 1.0);
                    Ok(fd
                        .iter()
                        .zip(&topo)
                        .map(|(f, t)| 2.0 * (1.0 - l) * f + (2.0 * l - 1.0) * t)
                        .collect())
                }
            }
            BlochKind::Custom { coefficients } => Ok(coefficients.clone()),
        }
    }

    pub fn eval(&self, k: &[f64]) -> Result<CMat> {
        Ok(self.clifford.combine(&self.coefficients(k)?))
    }
}

/// Momentum grid of a periodic or anti-periodic box.
#[derive(Debug, Clone)]
pub struct KGrid {
    pub side: usize,
    pub dimension: usize,
    pub boundary: Boundary,
    momenta: Vec<[f64; 3]>,
}

impl KGrid {
    /// `k_μ = 2π n_μ/L` (periodic) or `2π(n_μ + ½)/L` (anti-periodic),
    /// with the x component running fastest.
    pub fn new(dimension: usize, side: usize, boundary: Boundary) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::UnsupportedDimension(dimension));
        }
        let offset = match boundary {
            Boundary::Periodic => 0.0,
            Boundary::Antiperiodic => 0.5,
            Boundary::Open => return Err(invalid("boundary", "momentum grids need a wrapping boundary")),
        };
        if side == 0 {
            return Err(invalid("side", "must be positive"));
        }
        let n = side.pow(dimension as u32);
        let momenta = (0..n)
            .map(|idx| {
                let mut k = [0.0; 3];
                let mut rest = idx;
                for axis in k.iter_mut().take(dimension) {
                    *axis = 2.0 * PI * ((rest % side) as f64 + offset) / side as f64;
                    rest /= side;
                }
                k
            })
            .collect();
        Ok(Self {
            side,
            dimension,
            boundary,
            momenta,
        })
    }

    pub fn antiperiodic(dimension: usize, side: usize) -> Result<Self> {
        Self::new(dimension, side, Boundary::Antiperiodic)
    }

    pub fn momenta(&self) -> &[[f64; 3]] {
        &self.momenta
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }
}

/// Smallest squared eigenvalue of `h_λ(k)` over a λ grid and a k grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapCertificate {
    pub dimension: usize,
    pub side: usize,
    pub min_value: f64,
    pub argmin_lambda: f64,
    pub argmin_k: [f64; 3],
    /// `(λ, min_k ε_min(k)²)` for each λ.
    pub per_lambda: Vec<(f64, f64)>,
}

/// Guaranteed floor of the path's squared gap.
pub const GAP_FLOOR: f64 = 0.5;

impl GapCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_value >= GAP_FLOOR - tol
    }
}

/// `n` uniform points on `[0, 1]`.
pub fn lambda_grid(points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0];
    }
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

fn min_sq_eigenvalue(h: &CMat) -> f64 {
    let (values, _) = dense::small_eigh(h.as_ref());
    values.iter().map(|e| e * e).fold(f64::INFINITY, f64::min)
}

pub fn gap_certificate(dimension: usize, grid: &KGrid, lambdas: &[f64]) -> Result<GapCertificate> {
    if grid.dimension != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            got: grid.dimension,
        });
    }
    let rows: Vec<(f64, f64, [f64; 3])> = lambdas
        .par_iter()
        .map(|&l| {
            let model = BlochModel::path(dimension, l)?;
            let mut best = (f64::INFINITY, [0.0; 3]);
            for k in grid.momenta() {
                let v = min_sq_eigenvalue(&model.eval(k)?);
                if v < best.0 {
                    best = (v, *k);
                }
            }
            Ok((l, best.0, best.1))
        })
        .collect::<Result<_>>()?;
    let (argmin_lambda, min_value, argmin_k) = rows
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| invalid("lambdas", "empty grid"))?;
    Ok(GapCertificate {
        dimension,
        side: grid.side,
        min_value,
        argmin_lambda,
        argmin_k,
        per_lambda: rows.iter().map(|r| (r.0, r.1)).collect(),
    })
}

/// Momenta per parallel chunk; the chunk sums are added in a fixed order so
/// results do not depend on the thread count.
const K_CHUNK: usize = 1024;

/// `(1/L^d) Σ_k e^{ik·δ} M(k)` for each displacement.
fn fourier_blocks(grid: &KGrid, per_k: &[CMat], displacements: &[[i64; 3]]) -> Vec<CMat> {
    let s = per_k[0].nrows();
    let norm = 1.0 / grid.len() as f64;
    displacements
        .par_iter()
        .map(|delta| {
            let partial: Vec<CMat> = grid
                .momenta()
                .par_chunks(K_CHUNK)
                .zip(per_k.par_chunks(K_CHUNK))
                .map(|(ks, ms)| {
                    let mut acc = dense::zeros(s, s);
                    for (k, m) in ks.iter().zip(ms) {
                        let phase = C64::from_polar(
                            1.0,
                            k[0] * delta[0] as f64 + k[1] * delta[1] as f64 + k[2] * delta[2] as f64,
                        );
                        for j in 0..s {
                            for i in 0..s {
                                acc.write(i, j, acc.read(i, j) + m.read(i, j) * phase);
                            }
                        }
                    }
                    acc
                })
                .collect();
            let mut total = dense::zeros(s, s);
            for p in partial {
                total += p;
            }
            total * faer::scale(C64::new(norm, 0.0))
        })
        .collect()
}

/// `P_<(k)`: projector onto the negative eigenvectors of `h(k)`.
pub fn lower_projector(h: &CMat) -> Result<CMat> {
    let s = h.nrows();
    let (values, vectors) = dense::small_eigh(h.as_ref());
    let gap = values.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
    if gap <= 1e-10 {
        return Err(Error::Gapless(gap));
    }
    Ok(Mat::from_fn(s, s, |i, j| {
        values
            .iter()
            .enumerate()
            .filter(|(_, &e)| e < 0.0)
            .fold(ZERO, |acc, (c, _)| acc + vectors[c * s + i] * vectors[c * s + j].conj())
    }))
}

/// Covariance blocks `C_δ = (1/L^d) Σ_k e^{ik·δ} P_<(k)`, which depend on
/// the displacement `δ = r − r′` only.
pub fn bloch_covariance(model: &BlochModel, grid: &KGrid, displacements: &[[i64; 3]]) -> Result<Vec<CMat>> {
    let per_k: Vec<CMat> = grid
        .momenta()
        .par_iter()
        .map(|k| lower_projector(&model.eval(k)?))
        .collect::<Result<_>>()?;
    Ok(fourier_blocks(grid, &per_k, displacements))
}

/// Real-space hopping blocks `h_δ = (1/L^d) Σ_k e^{ik·δ} h(k)`.
pub fn real_space_hopping(model: &BlochModel, grid: &KGrid, displacements: &[[i64; 3]]) -> Result<Vec<CMat>> {
    let per_k: Vec<CMat> = grid
        .momenta()
        .par_iter()
        .map(|k| model.eval(k))
        .collect::<Result<_>>()?;
    Ok(fourier_blocks(grid, &per_k, displacements))
}

/// Separations `(x, 0, 0)` for odd `x` in the window.
pub fn odd_axis_displacements(window: FitWindow) -> Vec<[i64; 3]> {
    let lo = window.lo.ceil().max(1.0) as i64;
    let hi = window.hi.floor() as i64;
    (lo..=hi).filter(|x| x % 2 == 1).map(|x| [x, 0, 0]).collect()
}

/// Decay of a block table along the odd x axis.
pub fn block_decay(displacements: &[[i64; 3]], blocks: &[CMat], window: FitWindow) -> Result<DecayFit> {
    let samples: Vec<([i64; 3], f64)> = displacements
        .iter()
        .zip(blocks)
        .map(|(d, b)| (*d, dense::spectral_norm(b.as_ref())))
        .collect();
    decay_fit(&samples, Selection::OddXAxis, window)
}

/// Fit of `‖C_{0,(x,0,0)}‖` over odd `x` in the window.
pub fn covariance_decay(model: &BlochModel, grid: &KGrid, window: FitWindow) -> Result<DecayFit> {
    let displacements = odd_axis_displacements(window);
    let blocks = bloch_covariance(model, grid, &displacements)?;
    block_decay(&displacements, &blocks, window)
}

/// Fit of `‖h_{0,(x,0,0)}‖` over odd `x` in the window.
pub fn real_space_hopping_decay(model: &BlochModel, grid: &KGrid, window: FitWindow) -> Result<DecayFit> {
    let displacements = odd_axis_displacements(window);
    let blocks = real_space_hopping(model, grid, &displacements)?;
    block_decay(&displacements, &blocks, window)
}

/// Real-space operator `H_{rr′} = h_{r−r′}` on the box of the grid. The
/// raw coordinate difference is used, so wrapped hoppings carry the
/// boundary sign automatically.
pub fn assemble_real_space(model: &BlochModel, grid: &KGrid) -> Result<BlockOperator> {
    let m = model.internal_dim();
    let spec = LatticeSpec::new(grid.dimension, grid.side, grid.boundary, m)?;
    spec.require_dense(DEFAULT_DENSE_CAP)?;
    let lattice = Lattice::new(spec);
    let l = grid.side as i64;
    let span = 2 * l - 1;
    // Every raw difference lies in (−L, L) along each axis.
    let all: Vec<[i64; 3]> = (0..span.pow(grid.dimension as u32))
        .map(|idx| {
            let mut d = [0i64; 3];
            let mut rest = idx;
            for axis in d.iter_mut().take(grid.dimension) {
                *axis = rest % span - (l - 1);
                rest /= span;
            }
            d
        })
        .collect();
    let blocks = real_space_hopping(model, grid, &all)?;
    let slot = |d: [i64; 3]| -> usize {
        let mut idx = 0i64;
        let mut stride = 1i64;
        for &x in d.iter().take(grid.dimension) {
            idx += (x + l - 1) * stride;
            stride *= span;
        }
        idx as usize
    };
    let n = lattice.len();
    let mut data = dense::zeros(n * m, n * m);
    for r in 0..n {
        for rp in 0..n {
            let (x, y) = (lattice.coord(r), lattice.coord(rp));
            let b = &blocks[slot([x[0] - y[0], x[1] - y[1], x[2] - y[2]])];
            for a in 0..m {
                for c in 0..m {
                    data.write(r * m + a, rp * m + c, b.read(a, c));
                }
            }
        }
    }
    // Remove rounding asymmetry from the k sum before the Hermiticity check.
    let sym = Mat::from_fn(n * m, n * m, |i, j| (data.read(i, j) + data.read(j, i).conj()) * 0.5);
    BlockOperator::from_dense(spec, sym)
}
