//! Small dense helpers shared by every module: complex matrix aliases,
//! spectral norms of blocks, Hermiticity residuals and a Jacobi
//! eigensolver for the tiny internal matrices of Bloch models.

use faer::{Mat, MatRef};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

/// Conjugate transpose as an owned matrix.
pub fn adjoint(m: MatRef<'_, C64>) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m.read(j, i).conj())
}

pub fn from_real(m: MatRef<'_, f64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m.read(i, j), 0.0))
}

/// Frobenius norm.
pub fn frobenius(m: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m.read(i, j).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Largest absolute entry.
pub fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut acc: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m.read(i, j).norm());
        }
    }
    acc
}

pub fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc = acc.max((a.read(i, j) - b.read(i, j)).norm());
        }
    }
    acc
}

/// `‖m − m†‖_F`.
pub fn hermiticity_residual(m: MatRef<'_, C64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += (m.read(i, j) - m.read(j, i).conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn is_real(m: MatRef<'_, C64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m.read(i, j).im == 0.0))
}

/// Spectral (largest singular value) norm.
///
/// One- and two-dimensional blocks use closed forms; everything else goes
/// through a singular-value decomposition.
pub fn spectral_norm(m: MatRef<'_, C64>) -> f64 {
    match (m.nrows(), m.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, 1) => m.read(0, 0).norm(),
        (1, _) | (_, 1) => frobenius(m),
        (2, 2) => {
            // Largest eigenvalue of B†B.
            let (a, b, c, d) = (m.read(0, 0), m.read(0, 1), m.read(1, 0), m.read(1, 1));
            let p = a.norm_sqr() + c.norm_sqr();
            let q = b.norm_sqr() + d.norm_sqr();
            let off = a.conj() * b + c.conj() * d;
            let half_diff = 0.5 * (p - q);
            let lam = 0.5 * (p + q) + (half_diff * half_diff + off.norm_sqr()).sqrt();
            lam.max(0.0).sqrt()
        }
        _ => m.singular_values().into_iter().fold(0.0_f64, |acc, s| acc.max(s)),
    }
}

/// Spectral norm of a Hermitian matrix, via its eigenvalues.
pub fn hermitian_norm(m: MatRef<'_, C64>) -> f64 {
    if m.nrows() <= 2 {
        return spectral_norm(m);
    }
    m.selfadjoint_eigenvalues(faer::Side::Lower)
        .into_iter()
        .fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

/// Eigen-decomposition of a small Hermitian matrix by cyclic Jacobi
/// rotations. Returns ascending eigenvalues and the eigenvectors as
/// columns of a column-major `n × n` array.
pub fn small_eigh(m: MatRef<'_, C64>) -> (Vec<f64>, Vec<C64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut a: Vec<C64> = (0..n * n).map(|k| m.read(k % n, k / n)).collect();
    let mut v: Vec<C64> = (0..n * n).map(|k| if k % n == k / n { ONE } else { ZERO }).collect();
    let at = |i: usize, j: usize| j * n + i;

    let scale = a.iter().map(|x| x.norm()).fold(0.0_f64, f64::max).max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for q in 1..n {
            for p in 0..q {
                off += a[at(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for q in 1..n {
            for p in 0..q {
                let apq = a[at(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a[at(p, p)].re;
                let aqq = a[at(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotation V acts on columns p, q:
                //   col_p' = c col_p − s conj(phase) col_q
                //   col_q' = s phase col_p + c col_q
                let sp = phase * s;
                let spc = phase.conj() * s;
                for k in 0..n {
                    let akp = a[at(k, p)];
                    let akq = a[at(k, q)];
                    a[at(k, p)] = akp * c - akq * spc;
                    a[at(k, q)] = akp * sp + akq * c;
                }
                for k in 0..n {
                    let apk = a[at(p, k)];
                    let aqk = a[at(q, k)];
                    a[at(p, k)] = apk * c - aqk * sp;
                    a[at(q, k)] = apk * spc + aqk * c;
                }
                a[at(p, q)] = ZERO;
                a[at(q, p)] = ZERO;
                for k in 0..n {
                    let vkp = v[at(k, p)];
                    let vkq = v[at(k, q)];
                    v[at(k, p)] = vkp * c - vkq * spc;
                    v[at(k, q)] = vkp * sp + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[at(x, x)].re.total_cmp(&a[at(y, y)].re));
    let values = order.iter().map(|&k| a[at(k, k)].re).collect();
    let mut vectors = vec![ZERO; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[at(k, new)] = v[at(k, old)];
        }
    }
    (values, vectors)
}
