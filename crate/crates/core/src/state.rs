//! The (generally non-Hermitian) stable matrix `Â` behind a distance to
//! instability problem, either dense or as a banded pencil `Â = L^{-1} B`
//! with `L` real symmetric tridiagonal and `B` complex banded.

use std::fmt;
use std::sync::{Arc, OnceLock};

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::banded::{solve_tridiagonal, BandLu, BandMatrix};
use crate::error::Error;
use crate::krylov::{arnoldi_ritz, largest_eigenpairs, LanczosOptions};
use crate::linalg::{self, matvec, matvec_adjoint, J, ONE, ZERO};
use crate::ops::{ShiftedFactor, ShiftedSolver};

/// Dense operations (exact norm, full SVD) are used up to this size.
pub const DENSE_SVD_LIMIT: usize = 1200;

/// Largest pencil whose rightmost eigenvalue comes from a dense eigensolve.
pub const DENSE_EIG_LIMIT: usize = 2000;

const ARNOLDI_DIM: usize = 120;

#[derive(Debug, Clone)]
pub struct BandedPencil {
    l_diag: Vec<f64>,
    l_off: Vec<f64>,
    b: BandMatrix,
    bw: usize,
    split: Option<Split>,
}

/// `Â = alpha L + D + L^{-1} S` with `D` diagonal and `S` banded, so that
/// `B = L Â` never has to be applied and then undone by `L^{-1}`.
#[derive(Debug, Clone)]
struct Split {
    alpha: f64,
    d: Vec<C64>,
    s: BandMatrix,
    sw: usize,
}

impl BandedPencil {
    /// `l_diag`/`l_off` describe the tridiagonal `L`; `b` has half-bandwidth `bw`.
    pub fn new(l_diag: Vec<f64>, l_off: Vec<f64>, b: BandMatrix, bw: usize) -> Result<Self, Error> {
        let n = l_diag.len();
        if l_off.len() + 1 != n || b.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.dim(),
            });
        }
        Ok(Self {
            l_diag,
            l_off,
            b,
            bw,
            split: None,
        })
    }

    /// The pencil with `B = alpha L² + L D + S`; `S` has half-bandwidth `sw`.
    /// Products with `Â` and `Â^H` use the split form, which stays accurate
    /// when `alpha L²` dominates `B` and `L` is ill conditioned.
    pub fn split(
        l_diag: Vec<f64>,
        l_off: Vec<f64>,
        alpha: f64,
        d: Vec<C64>,
        s: BandMatrix,
        sw: usize,
    ) -> Result<Self, Error> {
        let n = l_diag.len();
        if l_off.len() + 1 != n || d.len() != n || s.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.dim(),
            });
        }
        let bw = sw.max(2);
        let mut b = BandMatrix::zeros(n, bw, bw);
        let mut p = Self {
            l_diag,
            l_off,
            b: BandMatrix::zeros(n, 0, 0),
            bw,
            split: None,
        };
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                let mut l2 = 0.0;
                for t in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                    l2 += p.l_entry(i, t) * p.l_entry(t, j);
                }
                let v = C64::new(alpha * l2, 0.0)
                    + d[j] * p.l_entry(i, j)
                    + if i.abs_diff(j) <= sw {
                        s.get(i, j)
                    } else {
                        ZERO
                    };
                if v != ZERO {
                    b.add(i, j, v);
                }
            }
        }
        p.b = b;
        p.split = Some(Split { alpha, d, s, sw });
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.l_diag.len()
    }

    fn l_apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = x[i] * self.l_diag[i];
            if i > 0 {
                s += x[i - 1] * self.l_off[i - 1];
            }
            if i + 1 < n {
                s += x[i + 1] * self.l_off[i];
            }
            y[i] = s;
        }
    }

    fn l_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.l_diag[i]
        } else if i == j + 1 {
            self.l_off[j]
        } else if j == i + 1 {
            self.l_off[i]
        } else {
            0.0
        }
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        match &self.split {
            Some(sp) => {
                sp.s.matvec(x, y);
                solve_tridiagonal(&self.l_diag, &self.l_off, y);
                let mut lx = vec![ZERO; x.len()];
                self.l_apply(x, &mut lx);
                for i in 0..x.len() {
                    y[i] += lx[i] * sp.alpha + sp.d[i] * x[i];
                }
            }
            None => {
                self.b.matvec(x, y);
                solve_tridiagonal(&self.l_diag, &self.l_off, y);
            }
        }
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        let mut t = x.to_vec();
        solve_tridiagonal(&self.l_diag, &self.l_off, &mut t);
        let n = self.dim();
        let (band, w) = match &self.split {
            Some(sp) => (&sp.s, sp.sw),
            None => (&self.b, self.bw),
        };
        for j in 0..n {
            let mut s = ZERO;
            for i in j.saturating_sub(w)..=(j + w).min(n - 1) {
                s += band.get(i, j).conj() * t[i];
            }
            y[j] = s;
        }
        if let Some(sp) = &self.split {
            let mut lx = vec![ZERO; n];
            self.l_apply(x, &mut lx);
            for i in 0..n {
                y[i] += lx[i] * sp.alpha + sp.d[i].conj() * x[i];
            }
        }
    }

    /// `K = B - mu j L` as a band matrix with half-bandwidth `max(bw, 1)`.
    fn shifted_b(&self, mu: f64, adjoint: bool) -> BandMatrix {
        let n = self.dim();
        let w = self.bw.max(1);
        let mut k = BandMatrix::zeros(n, w, w);
        for j in 0..n {
            for i in j.saturating_sub(w)..=(j + w).min(n - 1) {
                let v = self.b.get(i, j) - J * (mu * self.l_entry(i, j));
                if adjoint {
                    k.add(j, i, v.conj());
                } else {
                    k.add(i, j, v);
                }
            }
        }
        k
    }
}

pub enum StateMatrix {
    Dense {
        m: Mat<C64>,
        norm: OnceLock<f64>,
    },
    Pencil {
        p: BandedPencil,
        norm: OnceLock<f64>,
    },
}

impl fmt::Debug for StateMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dense { m, .. } => write!(f, "StateMatrix::Dense({}x{})", m.nrows(), m.ncols()),
            Self::Pencil { p, .. } => write!(f, "StateMatrix::Pencil(n={})", p.dim()),
        }
    }
}

impl StateMatrix {
    pub fn dense(m: Mat<C64>) -> Result<Self, Error> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        Ok(Self::Dense {
            m,
            norm: OnceLock::new(),
        })
    }

    pub fn pencil(p: BandedPencil) -> Self {
        Self::Pencil {
            p,
            norm: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense { m, .. } => m.nrows(),
            Self::Pencil { p, .. } => p.dim(),
        }
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Self::Dense { m, .. } => matvec(m.as_ref(), x, y),
            Self::Pencil { p, .. } => p.apply(x, y),
        }
    }

    pub fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Self::Dense { m, .. } => matvec_adjoint(m.as_ref(), x, y),
            Self::Pencil { p, .. } => p.apply_adjoint(x, y),
        }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        match self {
            Self::Dense { m, .. } => m.clone(),
            Self::Pencil { p, .. } => {
                let n = p.dim();
                let mut out = Mat::<C64>::zeros(n, n);
                let mut col = vec![ZERO; n];
                let mut e = vec![ZERO; n];
                for j in 0..n {
                    e[j] = ONE;
                    self.apply(&e, &mut col);
                    e[j] = ZERO;
                    for i in 0..n {
                        out[(i, j)] = col[i];
                    }
                }
                out
            }
        }
    }

    /// `‖Â‖₂`: exact for small dense matrices, otherwise a Lanczos estimate on
    /// `Â^H Â` inflated by 1%.
    pub fn norm(&self) -> Result<f64, Error> {
        let cell = match self {
            Self::Dense { norm, .. } | Self::Pencil { norm, .. } => norm,
        };
        if let Some(v) = cell.get() {
            return Ok(*v);
        }
        let v = match self {
            Self::Dense { m, .. } if m.nrows() <= DENSE_SVD_LIMIT => {
                linalg::spectral_norm(m.as_ref())?
            }
            _ => {
                let n = self.dim();
                let mut t = vec![ZERO; n];
                let opts = LanczosOptions {
                    tol: 1e-10,
                    max_dim: 80,
                    ..Default::default()
                };
                let top = largest_eigenpairs(
                    n,
                    1,
                    |x, y| {
                        self.apply(x, &mut t);
                        self.apply_adjoint(&t, y);
                    },
                    &opts,
                )?;
                1.01 * top[0].0.max(0.0).sqrt()
            }
        };
        let _ = cell.set(v);
        Ok(v)
    }

    /// All eigenvalues of `Â` from a dense eigendecomposition.
    pub fn eigenvalues(&self) -> Result<Vec<C64>, Error> {
        match self {
            Self::Dense { m, .. } => linalg::eigenvalues(m.as_ref()),
            Self::Pencil { .. } => linalg::eigenvalues(self.to_dense().as_ref()),
        }
    }

    /// Eigenvalue with the largest real part.
    ///
    /// Pencils above [`DENSE_EIG_LIMIT`] use shift-invert Arnoldi at the
    /// origin and return the rightmost converged Ritz value, which assumes
    /// the rightmost eigenvalue is among the ones nearest the origin.
    pub fn rightmost_eigenvalue(&self) -> Result<C64, Error> {
        if let Self::Pencil { p, .. } = self {
            if p.dim() > DENSE_EIG_LIMIT {
                return pencil_rightmost(p);
            }
        }
        let ev = self.eigenvalues()?;
        ev.into_iter()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .ok_or_else(|| Error::InvalidArgument("empty matrix".into()))
    }

    /// Smallest singular triplet `(sigma, u, v)` of `Â - mu j I` with
    /// `(Â - mu j I) v = sigma u`.
    pub fn sigma_min_triplet(&self, mu: f64) -> Result<(f64, Vec<C64>, Vec<C64>), Error> {
        match self {
            Self::Dense { m, .. } => {
                let shifted = Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
                    if i == j {
                        m[(i, j)] - J * mu
                    } else {
                        m[(i, j)]
                    }
                });
                linalg::smallest_singular_triplet(shifted.as_ref())
            }
            Self::Pencil { p, .. } => pencil_sigma_min(p, mu),
        }
    }

    pub fn sigma_min(&self, mu: f64) -> Result<f64, Error> {
        match self {
            Self::Dense { m, .. } => {
                let shifted = Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
                    if i == j {
                        m[(i, j)] - J * mu
                    } else {
                        m[(i, j)]
                    }
                });
                let sv = shifted
                    .singular_values()
                    .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
                Ok(*sv.last().unwrap_or(&0.0))
            }
            Self::Pencil { p, .. } => Ok(pencil_sigma_min(p, mu)?.0),
        }
    }

    /// Structured solver for the DTI block pair, available for pencils.
    pub fn shifted_solver(self: &Arc<Self>) -> Option<Arc<dyn ShiftedSolver>> {
        match self.as_ref() {
            Self::Pencil { .. } => Some(Arc::new(PencilDtiSolver {
                state: self.clone(),
            })),
            Self::Dense { .. } => None,
        }
    }
}

/// Ritz values `theta` of `Â^{-1} = B^{-1} L` give eigenvalues `1 / theta`.
fn pencil_rightmost(p: &BandedPencil) -> Result<C64, Error> {
    let lu = p.shifted_b(0.0, false).factor()?;
    let ritz = arnoldi_ritz(
        p.dim(),
        ARNOLDI_DIM,
        |x, y| {
            p.l_apply(x, y);
            lu.solve_in_place(y);
        },
        0x5eed,
    )?;
    ritz.iter()
        .filter(|(theta, res)| theta.norm() > 0.0 && *res <= 1e-8 * theta.norm())
        .map(|(theta, _)| theta.inv())
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| Error::Eigensolver("no converged Ritz value near the origin".into()))
}

/// With `M = L^{-1} K`, the inverse is `W = K^{-1} L`; Lanczos on `W W^H`
/// yields `1/sigma_min^2` and the right singular vector of `M`.
fn pencil_sigma_min(p: &BandedPencil, mu: f64) -> Result<(f64, Vec<C64>, Vec<C64>), Error> {
    let n = p.dim();
    let k = p.shifted_b(mu, false).factor()?;
    let kh = p.shifted_b(mu, true).factor()?;
    let mut t = vec![ZERO; n];
    let apply_wwh = |x: &[C64], y: &mut [C64]| {
        // y = K^{-1} L L K^{-H} x
        y.copy_from_slice(x);
        kh.solve_in_place(y);
        p.l_apply(y, &mut t);
        p.l_apply(&t, y);
        k.solve_in_place(y);
    };
    let opts = LanczosOptions {
        tol: 1e-13,
        max_dim: 120,
        ..Default::default()
    };
    let top = largest_eigenpairs(n, 1, apply_wwh, &opts)?;
    let (_, mut v) = top.into_iter().next().unwrap();
    // The banded factors carry rounding of order eps ‖K‖ ‖L^{-1}‖, so v is
    // polished by inverse iteration on M^H M with solves refined against the
    // accurate products.
    let m_apply = |x: &[C64], adjoint: bool| {
        let mut y = vec![ZERO; n];
        if adjoint {
            p.apply_adjoint(x, &mut y);
        } else {
            p.apply(x, &mut y);
        }
        let shift = if adjoint { J * mu } else { -J * mu };
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += shift * xi;
        }
        y
    };
    let rough_solve = |x: &[C64], adjoint: bool| {
        let mut y = vec![ZERO; n];
        if adjoint {
            // M^{-H} = L K^{-H}
            let mut t = x.to_vec();
            kh.solve_in_place(&mut t);
            p.l_apply(&t, &mut y);
        } else {
            p.l_apply(x, &mut y);
            k.solve_in_place(&mut y);
        }
        y
    };
    let solve = |x: &[C64], adjoint: bool| {
        let mut y = rough_solve(x, adjoint);
        for _ in 0..2 {
            let r = linalg::sub(x, &m_apply(&y, adjoint));
            linalg::axpy(ONE, &rough_solve(&r, adjoint), &mut y);
        }
        y
    };
    for _ in 0..3 {
        v = solve(&solve(&v, true), false);
        linalg::normalize(&mut v);
    }
    let mut u = m_apply(&v, false);
    let sigma = linalg::normalize(&mut u);
    Ok((sigma, u, v))
}

#[derive(Debug)]
struct PencilDtiSolver {
    state: Arc<StateMatrix>,
}

struct PencilDtiFactor {
    lu: BandLu,
    l_diag: Vec<f64>,
    l_off: Vec<f64>,
}

impl ShiftedSolver for PencilDtiSolver {
    /// With `y1 = L w`, `[[-λI, M], [M^H, -λI]] y = f` becomes the banded
    /// system `-λ L² w + K y2 = L f1`, `K^H w - λ y2 = f2`, interleaved as
    /// `(w_1, y2_1, w_2, y2_2, ...)`.
    fn factor(&self, mu: f64, lambda: f64) -> Result<Box<dyn ShiftedFactor>, Error> {
        let StateMatrix::Pencil { p, .. } = self.state.as_ref() else {
            return Err(Error::Unsupported("structured DTI solve"));
        };
        let n = p.dim();
        let q = p.bw.max(2);
        let bw = 2 * q + 1;
        let k = p.shifted_b(mu, false);
        let mut h = BandMatrix::zeros(2 * n, bw, bw);
        for i in 0..n {
            for c in i.saturating_sub(q)..=(i + q).min(n - 1) {
                // (L²)_{ic}
                let mut l2 = 0.0;
                for t in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                    l2 += p.l_entry(i, t) * p.l_entry(t, c);
                }
                if l2 != 0.0 {
                    h.add(2 * i, 2 * c, C64::new(-lambda * l2, 0.0));
                }
                let kic = k.get(i, c);
                if kic != ZERO {
                    h.add(2 * i, 2 * c + 1, kic);
                }
                let khic = k.get(c, i).conj();
                if khic != ZERO {
                    h.add(2 * i + 1, 2 * c, khic);
                }
            }
            h.add(2 * i + 1, 2 * i + 1, C64::new(-lambda, 0.0));
        }
        Ok(Box::new(PencilDtiFactor {
            lu: h.factor()?,
            l_diag: p.l_diag.clone(),
            l_off: p.l_off.clone(),
        }))
    }
}

impl ShiftedFactor for PencilDtiFactor {
    fn solve_in_place(&self, rhs: &mut [C64]) {
        let n = self.l_diag.len();
        let mut z = vec![ZERO; 2 * n];
        for i in 0..n {
            let mut s = rhs[i] * self.l_diag[i];
            if i > 0 {
                s += rhs[i - 1] * self.l_off[i - 1];
            }
            if i + 1 < n {
                s += rhs[i + 1] * self.l_off[i];
            }
            z[2 * i] = s;
            z[2 * i + 1] = rhs[n + i];
        }
        self.lu.solve_in_place(&mut z);
        for i in 0..n {
            let mut s = z[2 * i] * self.l_diag[i];
            if i > 0 {
                s += z[2 * i - 2] * self.l_off[i - 1];
            }
            if i + 1 < n {
                s += z[2 * i + 2] * self.l_off[i];
            }
            rhs[i] = s;
            rhs[n + i] = z[2 * i + 1];
        }
    }
}
