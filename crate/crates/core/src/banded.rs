//! Complex band matrices with an LU factorization using partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column `j` keeps rows
//! `j-ku-kl ..= j+kl`, with `kl` extra superdiagonals reserved for fill-in
//! from row interchanges.

use num_complex::Complex64 as C64;

use crate::error::Error;
use crate::linalg::ZERO;

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            ab: vec![ZERO; ld * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ld
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            ZERO
        }
    }

    /// Adds `v` to entry `(i, j)`; panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        y.fill(ZERO);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.ab[self.slot(i, j)] * x[j];
            }
        }
    }

    /// Factors in place. Fails on an exactly zero pivot.
    pub fn factor(mut self) -> Result<BandLu, Error> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let kv = kl + ku;
        let ld = self.ld;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let base = j * ld + kv;
            let mut jp = 0;
            let mut best = self.ab[base].norm();
            for t in 1..=km {
                let v = self.ab[base + t].norm();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(Error::JacobianSingular);
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = kv + j - c + c * ld;
                    let b = kv + j + jp - c + c * ld;
                    self.ab.swap(a, b);
                }
            }
            let inv = self.ab[base].inv();
            for t in 1..=km {
                self.ab[base + t] *= inv;
            }
            for c in (j + 1)..=ju {
                let u = self.ab[kv + j - c + c * ld];
                if u == ZERO {
                    continue;
                }
                for t in 1..=km {
                    let l = self.ab[base + t];
                    self.ab[kv + j + t - c + c * ld] -= l * u;
                }
            }
        }
        Ok(BandLu {
            m: self,
            ipiv,
            pivot_ratio: min_pivot / max_pivot,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
    pivot_ratio: f64,
}

impl BandLu {
    /// Smallest over largest pivot magnitude, a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        let ld = m.ld;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj == ZERO {
                continue;
            }
            let km = m.kl.min(n - 1 - j);
            for t in 1..=km {
                b[j + t] -= m.ab[j * ld + kv + t] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= m.ab[j * ld + kv];
            let bj = b[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                b[i] -= m.ab[kv + i - j + j * ld] * bj;
            }
        }
    }
}

/// Real symmetric tridiagonal solve by the Thomas algorithm; suited to
/// diagonally dominant systems.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], b: &mut [C64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    for i in 0..n {
        if i > 0 {
            d = diag[i] - off[i - 1] * c[i - 1];
            let prev = b[i - 1];
            b[i] -= prev * off[i - 1];
        }
        b[i] /= d;
        if i + 1 < n {
            c[i] = off[i] / d;
        }
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let next = b[i + 1];
        b[i] -= next * c[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    #[test]
    fn band_lu_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (6, 1, 2), (30, 5, 5), (17, 3, 1)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = Mat::<C64>::zeros(n, n);
            for j in 0..n {
                for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                    // weak diagonal forces pivoting
                    let v = if i == j {
                        rand_c(&mut rng) * 0.01
                    } else {
                        rand_c(&mut rng)
                    };
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let x: Vec<C64> = (0..n).map(|_| rand_c(&mut rng)).collect();
            let mut b = vec![ZERO; n];
            band.matvec(&x, &mut b);
            let lu = band.factor().unwrap();
            lu.solve_in_place(&mut b);
            let err: f64 = b
                .iter()
                .zip(&x)
                .map(|(a, c)| (a - c).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "n={n} err={err}");
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let band = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(band.factor(), Err(Error::JacobianSingular)));
    }

    #[test]
    fn tridiagonal_solve() {
        let diag = [-4.0, -4.0, -4.0, -4.0];
        let off = [1.0, 1.0, 1.0];
        let x = [
            C64::new(1.0, 2.0),
            C64::new(-1.0, 0.5),
            C64::new(0.0, 1.0),
            C64::new(3.0, 0.0),
        ];
        let mut b: Vec<C64> = (0..4)
            .map(|i| {
                let mut s = x[i] * diag[i];
                if i > 0 {
                    s += x[i - 1] * off[i - 1];
                }
                if i < 3 {
                    s += x[i + 1] * off[i];
                }
                s
            })
            .collect();
        solve_tridiagonal(&diag, &off, &mut b);
        for i in 0..4 {
            assert!((b[i] - x[i]).norm() < 1e-14);
        }
    }
}
