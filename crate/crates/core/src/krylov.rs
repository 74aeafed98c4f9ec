//! Krylov methods for matrix-free operators: Hermitian Lanczos with full
//! reorthogonalization for a few extreme eigenpairs, unrestarted Arnoldi for
//! Ritz values of a general operator, and unrestarted GMRES.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::linalg::{axpy, dotc, norm2, normalize, ZERO};

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_dim: 300,
            seed: 0x5eed,
        }
    }
}

/// The `k` algebraically largest eigenpairs of the Hermitian operator `op`,
/// in descending order.
pub fn largest_eigenpairs<F>(
    n: usize,
    k: usize,
    mut op: F,
    opts: &LanczosOptions,
) -> Result<Vec<(f64, Vec<C64>)>, Error>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot compute {k} eigenpairs of a size-{n} operator"
        )));
    }
    let max_dim = opts.max_dim.min(n).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    normalize(&mut q);

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    let mut op_norm = 0.0f64;

    loop {
        basis.push(q.clone());
        let m = basis.len();
        op(&q, &mut w);
        let a = dotc(&q, &w).re;
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let h = dotc(v, &w);
                axpy(-h, v, &mut w);
            }
        }
        let b = norm2(&w);
        op_norm = op_norm.max(a.abs() + b);

        let check = m >= k && (m.is_multiple_of(10) || m == max_dim || b <= 1e-14 * op_norm);
        if check {
            let (theta, s) = tridiagonal_eig(&alpha, &beta)?;
            let converged = (0..k).all(|i| {
                let idx = m - 1 - i;
                (b * s[(m - 1, idx)].abs()) <= opts.tol * op_norm.max(f64::MIN_POSITIVE)
            });
            if converged || m == max_dim || b <= 1e-14 * op_norm {
                let mut out = Vec::with_capacity(k);
                for i in 0..k {
                    let idx = m - 1 - i;
                    let mut x = vec![ZERO; n];
                    for (j, v) in basis.iter().enumerate() {
                        axpy(C64::new(s[(j, idx)], 0.0), v, &mut x);
                    }
                    normalize(&mut x);
                    out.push((theta[idx], x));
                }
                return Ok(out);
            }
        }
        if b <= 1e-14 * op_norm {
            // invariant subspace found before k pairs were available
            return Err(Error::Eigensolver("Lanczos breakdown".into()));
        }
        beta.push(b);
        q = w.iter().map(|v| v / b).collect();
    }
}

/// The `k` algebraically smallest eigenpairs, ascending.
pub fn smallest_eigenpairs<F>(
    n: usize,
    k: usize,
    mut op: F,
    opts: &LanczosOptions,
) -> Result<Vec<(f64, Vec<C64>)>, Error>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let pairs = largest_eigenpairs(
        n,
        k,
        |x, y| {
            op(x, y);
            for v in y.iter_mut() {
                *v = -*v;
            }
        },
        opts,
    )?;
    Ok(pairs.into_iter().map(|(l, x)| (-l, x)).collect())
}

/// Ritz values of a general operator from an unrestarted Arnoldi run of
/// dimension `dim`, each with the residual estimate `|h_{m+1,m} e_m^H y|`.
pub fn arnoldi_ritz<F>(n: usize, dim: usize, mut op: F, seed: u64) -> Result<Vec<(C64, f64)>, Error>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let m = dim.min(n);
    if m == 0 {
        return Err(Error::InvalidArgument(
            "Arnoldi needs a positive dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    normalize(&mut q);
    let mut basis = vec![q];
    let mut h = Mat::<C64>::zeros(m + 1, m);
    let mut w = vec![ZERO; n];
    let mut size = m;
    for j in 0..m {
        op(&basis[j], &mut w);
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dotc(v, &w);
                h[(i, j)] += c;
                axpy(-c, v, &mut w);
            }
        }
        let b = norm2(&w);
        h[(j + 1, j)] = C64::new(b, 0.0);
        if b <= 1e-14 * h[(j, j)].norm().max(1e-300) {
            size = j + 1;
            break;
        }
        basis.push(w.iter().map(|v| v / b).collect());
    }
    let hm = Mat::from_fn(size, size, |i, j| h[(i, j)]);
    let evd = hm
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let (vals, vecs) = (evd.S().column_vector(), evd.U());
    let tail = h[(size, size - 1)].norm();
    Ok((0..size)
        .map(|k| {
            let y = (0..size).map(|i| vecs[(i, k)]).collect::<Vec<_>>();
            (vals[k], tail * y[size - 1].norm() / norm2(&y))
        })
        .collect())
}

/// Unrestarted GMRES for `op(x) = b`, starting from zero. Returns the
/// iterate and whether the relative residual reached `tol`.
pub fn gmres<F>(b: &[C64], mut op: F, tol: f64, max_iter: usize) -> (Vec<C64>, bool)
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let beta = norm2(b);
    if beta == 0.0 {
        return (vec![ZERO; n], true);
    }
    let max_iter = max_iter.min(n).max(1);
    let mut v: Vec<Vec<C64>> = vec![b.iter().map(|x| x / beta).collect()];
    let mut h: Vec<Vec<C64>> = Vec::new();
    let mut cs: Vec<C64> = Vec::new();
    let mut sn: Vec<C64> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut w = vec![ZERO; n];
    let mut converged = false;
    for j in 0..max_iter {
        op(&v[j], &mut w);
        let mut col = vec![ZERO; j + 2];
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let hij = dotc(vi, &w);
                col[i] += hij;
                axpy(-hij, vi, &mut w);
            }
        }
        let hnext = norm2(&w);
        col[j + 1] = C64::new(hnext, 0.0);
        // apply previous rotations
        for i in 0..j {
            let t = cs[i].conj() * col[i] + sn[i].conj() * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let r = (col[j].norm_sqr() + col[j + 1].norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (crate::linalg::ONE, ZERO)
        } else {
            (col[j] / r, col[j + 1] / r)
        };
        col[j] = C64::new(r, 0.0);
        col[j + 1] = ZERO;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[j]);
        g[j] = c.conj() * g[j];
        h.push(col);
        if g[j + 1].norm() <= tol * beta || hnext == 0.0 {
            converged = true;
        }
        if converged || j + 1 == max_iter {
            break;
        }
        v.push(w.iter().map(|x| x / hnext).collect());
    }
    // back substitution on the triangular factor
    let k = h.len();
    let mut y = vec![ZERO; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for l in (i + 1)..k {
            s -= h[l][i] * y[l];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![ZERO; n];
    for (yi, vi) in y.iter().zip(&v) {
        axpy(*yi, vi, &mut x);
    }
    (x, converged)
}

fn tridiagonal_eig(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Mat<f64>), Error> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arnoldi_finds_dominant_eigenvalues() {
        // upper bidiagonal with known diagonal eigenvalues
        let n = 50;
        let d = |i: usize| C64::new(1.0 + i as f64 * 0.05, -0.1 * i as f64);
        let op = |x: &[C64], y: &mut [C64]| {
            for i in 0..n {
                y[i] = d(i) * x[i] + if i + 1 < n { x[i + 1] * 0.2 } else { ZERO };
            }
        };
        let ritz = arnoldi_ritz(n, n, op, 1).unwrap();
        let top = ritz
            .iter()
            .max_by(|a, b| a.0.norm().total_cmp(&b.0.norm()))
            .unwrap();
        assert!((top.0 - d(n - 1)).norm() < 1e-8, "{top:?}");
        assert!(top.1 < 1e-8);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 30;
        let op = |x: &[C64], y: &mut [C64]| {
            for i in 0..n {
                y[i] = x[i] * C64::new(2.0 + i as f64 * 0.1, 0.3);
                if i + 1 < n {
                    y[i] += x[i + 1] * 0.5;
                }
            }
        };
        let xs: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let mut b = vec![ZERO; n];
        op(&xs, &mut b);
        let (x, ok) = gmres(&b, op, 1e-13, 100);
        assert!(ok);
        for i in 0..n {
            assert!((x[i] - xs[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn diagonal_operator_extremes() {
        let n = 200;
        let d: Vec<f64> = (0..n).map(|i| (i as f64) * 0.1 - 3.0).collect();
        let op = |x: &[C64], y: &mut [C64]| {
            for i in 0..n {
                y[i] = x[i] * d[i];
            }
        };
        let top = largest_eigenpairs(n, 2, op, &LanczosOptions::default()).unwrap();
        assert!((top[0].0 - d[n - 1]).abs() < 1e-10);
        assert!((top[1].0 - d[n - 2]).abs() < 1e-10);
        assert!(top[0].1[n - 1].norm() > 1.0 - 1e-8);
        let low = smallest_eigenpairs(n, 2, op, &LanczosOptions::default()).unwrap();
        assert!((low[0].0 + 3.0).abs() < 1e-10);
        assert!((low[1].0 + 2.9).abs() < 1e-10);
    }
}
