//! Randomized checks of the coarse-graining lemmas, the lattice-sum
//! propositions and the Hölder bound of the damping path.
//!
//! Trial `k` draws everything from `ChaCha8Rng::seed_from_u64(seed + k)`,
//! so a report is a pure function of `(seed, trials)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{self, C64};
use crate::dynamics::check_sr_block_bound;
use crate::error::Result;
use crate::lattice::{
    check_lattice_sum_bounds, geometry_constants, lattice_sum_constants, Boundary, CoarseGraining, GeometryConstants,
    Lattice, LatticeSpec, SumCheck,
};
use crate::operators::{
    certify_alpha_decay, check_coarse_block_bound, damp_exponential, holder_bound, split_range, BlockOperator,
    BoundReport,
};

/// Decay exponents the suite samples from.
pub const ALPHA_GRID: [f64; 8] = [1.25, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0];

/// Random blocks with `‖H_{rr′}‖ ≤ J/(|r−r′|+1)^α`: each block is a random
/// matrix rescaled to a random fraction of its allowance, and the lower
/// triangle is the adjoint of the upper one.
pub fn random_decaying_model(spec: LatticeSpec, j: f64, alpha: f64, rng: &mut impl Rng) -> Result<BlockOperator> {
    spec.require_dense(crate::lattice::DEFAULT_DENSE_CAP)?;
    let lattice = Lattice::new(spec);
    let n = lattice.len();
    let m = spec.internal_dim;
    let mut data = dense::zeros(n * m, n * m);
    for r in 0..n {
        for rp in r..n {
            let allowance = j / (lattice.distance(r, rp) + 1.0).powf(alpha);
            let raw = faer::Mat::from_fn(m, m, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let raw = if r == rp {
                &raw + &dense::adjoint(raw.as_ref())
            } else {
                raw
            };
            let norm = dense::spectral_norm(raw.as_ref()).max(1e-300);
            let scale = allowance * rng.gen_range(0.0..1.0) / norm;
            for a in 0..m {
                for b in 0..m {
                    let v = raw.read(a, b) * scale;
                    data.write(r * m + a, rp * m + b, v);
                    data.write(rp * m + b, r * m + a, v.conj());
                }
            }
        }
    }
    BlockOperator::from_dense(spec, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteCheck {
    /// Coarse-grained long-range block bound.
    CoarseLongRange,
    /// Coarse-grained short-range propagator bound.
    CoarseShortRange,
    /// Convolution of exponential and power-law lattice sums.
    Convolution,
    /// Reproducibility of the power-law tail under convolution.
    Reproducibility,
    /// `‖H_κ − H_κ′‖ ≤ 2c1J|κ−κ′|^{(α−d)/(α−d+1)}`.
    Holder,
}

impl SuiteCheck {
    pub const ALL: [SuiteCheck; 5] = [
        SuiteCheck::CoarseLongRange,
        SuiteCheck::CoarseShortRange,
        SuiteCheck::Convolution,
        SuiteCheck::Reproducibility,
        SuiteCheck::Holder,
    ];
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub check: SuiteCheck,
    pub trials: usize,
    /// Individual inequalities evaluated across all trials.
    pub checked: usize,
    pub worst_ratio: f64,
    pub violations: usize,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.violations == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(SuiteEntry::passed)
    }
}

struct Instance {
    h: BlockOperator,
    grain: CoarseGraining,
    constants: GeometryConstants,
}

/// Small random instance with `α > d` and a χ-graining compatible with the
/// boundary.
fn random_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let d = *[1usize, 1, 2].choose(rng).expect("non-empty");
    let alphas: Vec<f64> = ALPHA_GRID.iter().copied().filter(|&a| a > d as f64).collect();
    let alpha = *alphas.choose(rng).expect("grid has entries above d");
    let chi = rng.gen_range(2..=3usize);
    let cells = if d == 1 {
        rng.gen_range(3..=8usize)
    } else {
        rng.gen_range(2..=3usize)
    };
    let boundary = *[Boundary::Open, Boundary::Periodic, Boundary::Antiperiodic]
        .choose(rng)
        .expect("non-empty");
    let m = rng.gen_range(1..=2usize);
    let spec = LatticeSpec::new(d, chi * cells, boundary, m)?;
    let j = rng.gen_range(0.25..2.0);
    let h = random_decaying_model(spec, j, alpha, rng)?;
    let cert = certify_alpha_decay(&h, alpha);
    let lattice = h.lattice().clone();
    let mut shift = [0i64; 3];
    for s in shift.iter_mut().take(d) {
        *s = rng.gen_range(0..chi as i64);
    }
    let grain = CoarseGraining::with_shift(&lattice, chi, shift)?;
    let constants = geometry_constants(&spec, alpha, cert.j.max(1e-12), &grain)?;
    Ok(Instance { h, grain, constants })
}

fn run_trial(check: SuiteCheck, seed: u64) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match check {
        SuiteCheck::CoarseLongRange => {
            let inst = random_instance(&mut rng)?;
            let split = split_range(&inst.h, inst.grain.chi())?;
            check_coarse_block_bound(&split, &inst.grain, &inst.constants)
        }
        SuiteCheck::CoarseShortRange => {
            let inst = random_instance(&mut rng)?;
            let split = split_range(&inst.h, inst.grain.chi())?;
            let times: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..3.0)).collect();
            check_sr_block_bound(&split, &inst.grain, &inst.constants, &times)
        }
        SuiteCheck::Convolution | SuiteCheck::Reproducibility => {
            let d = rng.gen_range(1..=3usize);
            let alphas: Vec<f64> = ALPHA_GRID.iter().copied().filter(|&a| a > d as f64).collect();
            let alpha = *alphas.choose(&mut rng).expect("grid has entries above d");
            let side = [0, 60, 16, 7][d];
            let boundary = *[Boundary::Open, Boundary::Periodic]
                .choose(&mut rng)
                .expect("non-empty");
            let lattice = Lattice::new(LatticeSpec::new(d, side, boundary, 1)?);
            let (b, c1) = lattice_sum_constants(d, alpha)?;
            let constants = GeometryConstants::from_parts(d, alpha, 1.0, b, c1, 0.0);
            let mode = if check == SuiteCheck::Convolution {
                SumCheck::Convolution
            } else {
                SumCheck::Reproducibility
            };
            let report = check_lattice_sum_bounds(&lattice, &constants, mode, 1, 6.0, rng.gen())?;
            Ok(BoundReport::from_ratios([report.worst_ratio]))
        }
        SuiteCheck::Holder => {
            let inst = random_instance(&mut rng)?;
            let kappa = rng.gen_range(0.0..2.0);
            let kappa_p = rng.gen_range(0.0..2.0);
            let a = damp_exponential(&inst.h, kappa)?;
            let b = damp_exponential(&inst.h, kappa_p)?;
            let diff = &a.data().to_owned() - &b.data().to_owned();
            let lhs = dense::hermitian_norm(diff.as_ref());
            let rhs = holder_bound(kappa, kappa_p, &inst.constants);
            let ratio = if rhs == 0.0 {
                if lhs == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                lhs / rhs
            };
            Ok(BoundReport::from_ratios([ratio]))
        }
    }
}

/// Run `trials` random instances of each check.
pub fn run_suite(checks: &[SuiteCheck], trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut entries = Vec::new();
    for &check in checks {
        let reports: Vec<BoundReport> = (0..trials)
            .into_par_iter()
            .map(|k| run_trial(check, seed.wrapping_add(k as u64)))
            .collect::<Result<_>>()?;
        entries.push(SuiteEntry {
            check,
            trials,
            checked: reports.iter().map(|r| r.checked).sum(),
            worst_ratio: reports.iter().map(|r| r.worst_ratio).fold(0.0, f64::max),
            violations: reports.iter().map(|r| r.violations).sum(),
        });
    }
    Ok(SuiteReport { seed, entries })
}
