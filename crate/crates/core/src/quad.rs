//! Numerical quadrature: adaptive Gauss-Kronrod (7/15) on finite real
//! intervals for complex integrands, and the trapezoidal rule on circles.

// Nodes and weights keep their published digits.
#![allow(clippy::excessive_precision)]

use crate::dense::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub intervals: usize,
}

fn kronrod<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kron += fsum * WGK[j];
        if j % 2 == 1 {
            gauss += fsum * WG[j / 2];
        }
    }
    let kron = kron * half;
    let gauss = gauss * half;
    (kron, (kron - gauss).norm())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate meets `max(abs_tol, rel_tol·|value|)` or the interval budget runs
/// out. Endpoints are never evaluated, so integrable endpoint singularities
/// are allowed.
pub fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult {
            value: C64::new(0.0, 0.0),
            error: 0.0,
            intervals: 0,
        };
    }
    // Max-heap by error; a plain vector is fast enough at these sizes.
    let (v0, e0) = kronrod(&f, a, b);
    let mut pieces: Vec<(f64, f64, C64, f64)> = vec![(a, b, v0, e0)];
    loop {
        let value: C64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.norm());
        if error <= target || pieces.len() >= opts.max_intervals {
            return QuadResult {
                value,
                error,
                intervals: pieces.len(),
            };
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further in floating point.
            let (v, _) = kronrod(&f, lo, hi);
            pieces.push((lo, hi, v, 0.0));
            continue;
        }
        let (vl, el) = kronrod(&f, lo, mid);
        let (vr, er) = kronrod(&f, mid, hi);
        pieces.push((lo, mid, vl, el));
        pieces.push((mid, hi, vr, er));
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> (f64, f64) {
    let r = integrate(|x| C64::new(f(x), 0.0), a, b, opts);
    (r.value.re, r.error)
}

/// Circle `z(θ) = center + radius·e^{iθ}` discretised with `nodes`
/// equispaced points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: C64,
    pub radius: f64,
    pub nodes: usize,
}

impl Circle {
    /// Quadrature nodes `z_k` and weights `w_k` such that
    /// `∮ dz/(2πi) g(z) ≈ Σ_k w_k g(z_k)`.
    pub fn nodes_and_weights(&self) -> Vec<(C64, C64)> {
        let n = self.nodes as f64;
        (0..self.nodes)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n;
                let e = C64::from_polar(1.0, theta);
                (self.center + e * self.radius, e * (self.radius / n))
            })
            .collect()
    }

    /// Exact trapezoidal-rule value of `∮ dz/(2πi) 1/(z − ε)` for a real or
    /// complex pole `ε`: `1/(1 − q^N)` inside, `−q'^N/(1 − q'^N)` outside.
    pub fn pole_weight(&self, eps: C64) -> C64 {
        let q = (eps - self.center) / self.radius;
        let n = self.nodes as i32;
        if q.norm() < 1.0 {
            C64::new(1.0, 0.0) / (C64::new(1.0, 0.0) - q.powi(n))
        } else {
            let qo = C64::new(1.0, 0.0) / q;
            let qn = qo.powi(n);
            -qn / (C64::new(1.0, 0.0) - qn)
        }
    }
}
