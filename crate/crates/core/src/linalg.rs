//! Small dense helpers on top of `faer`: vector kernels, Hermitian
//! eigendecompositions, and a closed-form 2×2 Hermitian eigensolver.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::Error;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// `x^H y`.
pub fn dotc(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    let mut s = ZERO;
    for (a, b) in x.iter().zip(y) {
        s += a.conj() * b;
    }
    s
}

pub fn norm2(x: &[C64]) -> f64 {
    // scaled accumulation so tiny residuals do not underflow
    let scale = x
        .iter()
        .map(|v| v.re.abs().max(v.im.abs()))
        .fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let mut s = 0.0;
    for v in x {
        let (a, b) = (v.re / scale, v.im / scale);
        s += a * a + b * b;
    }
    scale * s.sqrt()
}

pub fn scale(x: &mut [C64], s: C64) {
    for v in x {
        *v *= s;
    }
}

/// `y += a x`.
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Normalizes in place and returns the original norm.
pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm2(x);
    if n > 0.0 {
        let inv = 1.0 / n;
        for v in x.iter_mut() {
            *v *= inv;
        }
    }
    n
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn real_vec(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

pub fn unit(n: usize, k: usize) -> Vec<C64> {
    let mut e = vec![ZERO; n];
    e[k] = ONE;
    e
}

/// `y = M x` for a dense column-major matrix.
pub fn matvec(m: MatRef<'_, C64>, x: &[C64], y: &mut [C64]) {
    assert_eq!(m.ncols(), x.len());
    assert_eq!(m.nrows(), y.len());
    y.fill(ZERO);
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        let col = m.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
}

/// `y = M^H x`.
pub fn matvec_adjoint(m: MatRef<'_, C64>, x: &[C64], y: &mut [C64]) {
    assert_eq!(m.nrows(), x.len());
    assert_eq!(m.ncols(), y.len());
    for (j, yj) in y.iter_mut().enumerate() {
        let col = m.col(j);
        let mut s = ZERO;
        for (i, &xi) in x.iter().enumerate() {
            s += col[i].conj() * xi;
        }
        *yj = s;
    }
}

pub fn col_to_vec(m: MatRef<'_, C64>, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn mat_from_cols(cols: &[&[C64]]) -> Mat<C64> {
    let n = cols.first().map_or(0, |c| c.len());
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Eigenvalues ascending with orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eig(m: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>), Error> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|v| v.re).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn hermitian_eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<f64>, Error> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Spectral norm of a Hermitian matrix from its extreme eigenvalues.
pub fn hermitian_norm(m: MatRef<'_, C64>) -> Result<f64, Error> {
    let ev = hermitian_eigenvalues(m)?;
    Ok(ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Spectral norm of a general matrix.
pub fn spectral_norm(m: MatRef<'_, C64>) -> Result<f64, Error> {
    let sv = m
        .singular_values()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok(sv.first().copied().unwrap_or(0.0))
}

pub fn eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<C64>, Error> {
    m.eigenvalues()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Smallest singular triplet `(sigma, u, v)` with `M v = sigma u`.
pub fn smallest_singular_triplet(m: MatRef<'_, C64>) -> Result<(f64, Vec<C64>, Vec<C64>), Error> {
    let svd = m.svd().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let k = m.nrows().min(m.ncols()) - 1;
    let sigma = svd.S().column_vector()[k].re;
    Ok((sigma, col_to_vec(svd.U(), k), col_to_vec(svd.V(), k)))
}

/// Eigendecomposition of the 2×2 Hermitian matrix `[[a11, a12], [conj(a12), a22]]`.
///
/// Returns `(l1, l2, q)` with `l1 >= l2` and `q` the unitary whose columns are
/// the matching eigenvectors, stored column-major as `[q11, q21, q12, q22]`.
pub fn hermitian_eig_2x2(a11: f64, a12: C64, a22: f64) -> (f64, f64, [C64; 4]) {
    let b = a12.norm();
    let half_diff = 0.5 * (a11 - a22);
    let mean = 0.5 * (a11 + a22);
    let rad = half_diff.hypot(b);
    let (l1, l2) = (mean + rad, mean - rad);
    if b == 0.0 {
        return if a11 >= a22 {
            (a11, a22, [ONE, ZERO, ZERO, ONE])
        } else {
            (a22, a11, [ZERO, ONE, ONE, ZERO])
        };
    }
    let phase = a12 / b;
    // Rotation angle from tan(2t) = b / half_diff, chosen for stability.
    let t = 0.5 * b.atan2(half_diff);
    let (s, c) = t.sin_cos();
    let q11 = C64::new(c, 0.0);
    let q21 = phase.conj() * s;
    let q12 = -phase * s;
    let q22 = C64::new(c, 0.0);
    (l1, l2, [q11, q21, q12, q22])
}

/// Solves the real least-squares problem `min ||M z - b||` for a tall matrix
/// with two columns, returning the minimum-norm solution.
pub fn lstsq_2col(c0: &[f64], c1: &[f64], b: &[f64]) -> [f64; 2] {
    // Householder-free approach: orthogonalize the columns explicitly.
    let n0 = c0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let n1 = c1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let big = n0.max(n1);
    if big == 0.0 {
        return [0.0, 0.0];
    }
    let (p, q, swapped) = if n0 >= n1 {
        (c0, c1, false)
    } else {
        (c1, c0, true)
    };
    let np = n0.max(n1);
    let qp: Vec<f64> = p.iter().map(|v| v / np).collect();
    let r01: f64 = qp.iter().zip(q).map(|(a, b)| a * b).sum();
    let mut w: Vec<f64> = q.iter().zip(&qp).map(|(a, b)| a - r01 * b).collect();
    // second Gram-Schmidt pass
    let corr: f64 = qp.iter().zip(&w).map(|(a, b)| a * b).sum();
    for (wi, qi) in w.iter_mut().zip(&qp) {
        *wi -= corr * qi;
    }
    let r01 = r01 + corr;
    let r11 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bp: f64 = qp.iter().zip(b).map(|(a, b)| a * b).sum();
    let (zp, zq) = if r11 <= 1e-13 * np {
        // rank one: minimum-norm solution along the dominant direction
        let denom = np * np + r01 * r01;
        (bp * np / denom, bp * r01 / denom)
    } else {
        let bq: f64 = w.iter().zip(b).map(|(a, b)| a * b).sum::<f64>() / r11;
        let zq = bq / r11;
        ((bp - r01 * zq) / np, zq)
    };
    if swapped {
        [zq, zp]
    } else {
        [zp, zq]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_2x2_reconstructs() {
        let cases = [
            (1.0, C64::new(0.3, -0.2), -2.0),
            (0.5, C64::new(0.0, 1e-9), 0.5),
            (-1.0, C64::new(-2.0, 0.0), 3.0),
            (2.0, ZERO, 5.0),
        ];
        for (a11, a12, a22) in cases {
            let (l1, l2, q) = hermitian_eig_2x2(a11, a12, a22);
            assert!(l1 >= l2);
            let a = [[C64::new(a11, 0.0), a12], [a12.conj(), C64::new(a22, 0.0)]];
            for (col, l) in [(0, l1), (1, l2)] {
                let v = [q[2 * col], q[2 * col + 1]];
                for (i, row) in a.iter().enumerate() {
                    let av = row[0] * v[0] + row[1] * v[1];
                    assert!((av - v[i] * l).norm() < 1e-14 * (1.0 + l.abs()));
                }
            }
            let ortho = q[0].conj() * q[2] + q[1].conj() * q[3];
            assert!(ortho.norm() < 1e-15);
        }
    }

    #[test]
    fn lstsq_matches_exact_solution() {
        let c0 = [1.0, 0.0, 2.0, -1.0];
        let c1 = [0.5, 1.0, 0.0, 3.0];
        let b: Vec<f64> = (0..4).map(|i| 2.0 * c0[i] - 0.25 * c1[i]).collect();
        let z = lstsq_2col(&c0, &c1, &b);
        assert!((z[0] - 2.0).abs() < 1e-14 && (z[1] + 0.25).abs() < 1e-14);
    }

    #[test]
    fn lstsq_rank_one_is_minimum_norm() {
        let c0 = [1.0, 1.0];
        let c1 = [2.0, 2.0];
        let z = lstsq_2col(&c0, &c1, &[5.0, 5.0]);
        // z0 + 2 z1 = 5 with minimal norm: z = (1, 2)
        assert!((z[0] - 1.0).abs() < 1e-14 && (z[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn norm2_handles_tiny_values() {
        let x = vec![C64::new(1e-200, 0.0), C64::new(0.0, 1e-200)];
        assert!((norm2(&x) / 1e-200 - 2f64.sqrt()).abs() < 1e-15);
    }
}
