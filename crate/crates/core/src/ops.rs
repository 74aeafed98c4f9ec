//! Hermitian operators and the `(A, C)` pair consumed by the solvers.

use std::fmt;
use std::sync::{Arc, OnceLock};

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::krylov::{largest_eigenpairs, smallest_eigenpairs, LanczosOptions};
use crate::linalg::{self, dotc, matvec, ZERO};
use crate::state::StateMatrix;

/// Largest dimension for which a pair is materialized densely on demand.
pub const DENSE_LIMIT: usize = 4096;
/// Kronecker-structured pairs stay matrix-free beyond this dimension.
pub const KRONECKER_DENSE_LIMIT: usize = 1024;

pub trait HermitianOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `y = M x`.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    fn to_dense(&self) -> Mat<C64> {
        let n = self.dim();
        let mut out = Mat::<C64>::zeros(n, n);
        let mut e = vec![ZERO; n];
        let mut y = vec![ZERO; n];
        for j in 0..n {
            e[j] = linalg::ONE;
            self.apply(&e, &mut y);
            e[j] = ZERO;
            for i in 0..n {
                out[(i, j)] = y[i];
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DenseHermitian {
    m: Mat<C64>,
}

impl DenseHermitian {
    /// Wraps `m` after checking Hermitian symmetry to `1e-12` relative.
    pub fn new(m: Mat<C64>) -> Result<Self, Error> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut scale = 0.0f64;
        let mut asym = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                scale = scale.max(m[(i, j)].norm());
                asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not Hermitian (defect {asym:e})"
            )));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.m
    }
}

impl HermitianOperator for DenseHermitian {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        matvec(self.m.as_ref(), x, y);
    }
    fn to_dense(&self) -> Mat<C64> {
        self.m.clone()
    }
}

/// `F ⊗ g g^H` acting on `vec(X)` with `X` stored column-major, so the
/// product is `vec(g (g^H X) F^T)` at `O(m^2)` cost.
#[derive(Debug, Clone)]
pub struct KroneckerRankOne {
    f: Mat<C64>,
    g: Vec<C64>,
}

impl KroneckerRankOne {
    pub fn new(f: Mat<C64>, g: Vec<C64>) -> Result<Self, Error> {
        if f.nrows() != f.ncols() || f.nrows() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: f.nrows(),
                got: g.len(),
            });
        }
        Ok(Self { f, g })
    }
}

impl HermitianOperator for KroneckerRankOne {
    fn dim(&self) -> usize {
        self.g.len() * self.g.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let m = self.g.len();
        // t_j = g^H X[:, j]
        let t: Vec<C64> = (0..m)
            .map(|j| dotc(&self.g, &x[j * m..(j + 1) * m]))
            .collect();
        // s_k = sum_j t_j F[k, j]
        let mut s = vec![ZERO; m];
        matvec(self.f.as_ref(), &t, &mut s);
        for k in 0..m {
            for i in 0..m {
                y[i + k * m] = self.g[i] * s[k];
            }
        }
    }
}

/// `sum_i w_i M_i`.
#[derive(Debug, Clone)]
pub struct Combination {
    terms: Vec<(f64, Arc<dyn HermitianOperator>)>,
}

impl Combination {
    pub fn new(terms: Vec<(f64, Arc<dyn HermitianOperator>)>) -> Result<Self, Error> {
        let n = terms
            .first()
            .map(|t| t.1.dim())
            .ok_or_else(|| Error::InvalidArgument("empty combination".into()))?;
        for (_, op) in &terms {
            if op.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: op.dim(),
                });
            }
        }
        Ok(Self { terms })
    }
}

impl HermitianOperator for Combination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.fill(ZERO);
        let mut tmp = vec![ZERO; x.len()];
        for (w, op) in &self.terms {
            op.apply(x, &mut tmp);
            linalg::axpy(C64::new(*w, 0.0), &tmp, y);
        }
    }
}

/// `[[0, Â], [Â^H, 0]]`.
#[derive(Debug, Clone)]
pub struct DtiBlockA {
    ahat: Arc<StateMatrix>,
}

impl HermitianOperator for DtiBlockA {
    fn dim(&self) -> usize {
        2 * self.ahat.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let m = self.ahat.dim();
        let (x1, x2) = x.split_at(m);
        let (y1, y2) = y.split_at_mut(m);
        self.ahat.apply(x2, y1);
        self.ahat.apply_adjoint(x1, y2);
    }
}

/// `[[0, jI], [-jI, 0]]`.
#[derive(Debug, Clone)]
pub struct DtiBlockC {
    m: usize,
}

impl HermitianOperator for DtiBlockC {
    fn dim(&self) -> usize {
        2 * self.m
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let m = self.m;
        for i in 0..m {
            y[i] = linalg::J * x[m + i];
            y[m + i] = -linalg::J * x[i];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Dense,
    KroneckerRankOne,
    DtiBlock,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Which {
    A,
    C,
    /// `A - mu C`.
    Shifted(f64),
}

/// Solves with `A - mu C - lambda I` for a structured pair.
pub trait ShiftedSolver: Send + Sync + fmt::Debug {
    fn factor(&self, mu: f64, lambda: f64) -> Result<Box<dyn ShiftedFactor>, Error>;
}

pub trait ShiftedFactor {
    fn solve_in_place(&self, rhs: &mut [C64]);
}

/// The problem datum `(A, C)` with cached norms.
#[derive(Clone)]
pub struct HermitianPair {
    a: Arc<dyn HermitianOperator>,
    c: Arc<dyn HermitianOperator>,
    a_norm: f64,
    c_norm: f64,
    structure: Structure,
    c_indefinite: Option<bool>,
    dense: Arc<OnceLock<(Mat<C64>, Mat<C64>)>>,
    solver: Option<Arc<dyn ShiftedSolver>>,
    state: Option<Arc<StateMatrix>>,
}

impl fmt::Debug for HermitianPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermitianPair")
            .field("dim", &self.dim())
            .field("a_norm", &self.a_norm)
            .field("c_norm", &self.c_norm)
            .field("structure", &self.structure)
            .finish()
    }
}

impl HermitianPair {
    /// Dense pair with exact spectral norms and an indefiniteness check on `C`.
    pub fn dense(a: Mat<C64>, c: Mat<C64>) -> Result<Self, Error> {
        let a = DenseHermitian::new(a)?;
        let c = DenseHermitian::new(c)?;
        if a.dim() != c.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: c.dim(),
            });
        }
        let a_norm = linalg::hermitian_norm(a.matrix().as_ref())?;
        let cev = linalg::hermitian_eigenvalues(c.matrix().as_ref())?;
        let c_norm = cev.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let tol = 1e-14 * c_norm;
        let indefinite =
            cev.first().is_some_and(|&l| l < -tol) && cev.last().is_some_and(|&l| l > tol);
        let dense = OnceLock::new();
        let _ = dense.set((a.matrix().clone(), c.matrix().clone()));
        Ok(Self {
            a: Arc::new(a),
            c: Arc::new(c),
            a_norm,
            c_norm,
            structure: Structure::Dense,
            c_indefinite: Some(indefinite),
            dense: Arc::new(dense),
            solver: None,
            state: None,
        })
    }

    /// Matrix-free pair; norms are Lanczos estimates inflated by 1%.
    pub fn from_operators(
        a: Arc<dyn HermitianOperator>,
        c: Arc<dyn HermitianOperator>,
        structure: Structure,
    ) -> Result<Self, Error> {
        if a.dim() != c.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: c.dim(),
            });
        }
        let a_norm = operator_norm_estimate(a.as_ref())?;
        let c_norm = operator_norm_estimate(c.as_ref())?;
        Ok(Self {
            a,
            c,
            a_norm,
            c_norm,
            structure,
            c_indefinite: None,
            dense: Arc::new(OnceLock::new()),
            solver: None,
            state: None,
        })
    }

    /// The block pair `A = [[0, Â], [Â^H, 0]]`, `C = [[0, jI], [-jI, 0]]`.
    pub fn dti(ahat: Arc<StateMatrix>) -> Result<Self, Error> {
        let m = ahat.dim();
        Ok(Self {
            a: Arc::new(DtiBlockA { ahat: ahat.clone() }),
            c: Arc::new(DtiBlockC { m }),
            a_norm: ahat.norm()?,
            c_norm: 1.0,
            structure: Structure::DtiBlock,
            c_indefinite: Some(true),
            dense: Arc::new(OnceLock::new()),
            solver: ahat.shifted_solver(),
            state: Some(ahat),
        })
    }

    /// Records that `C` is known to be indefinite, skipping the check.
    pub(crate) fn with_indefinite_c(mut self) -> Self {
        self.c_indefinite = Some(true);
        self
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }
    pub fn structure(&self) -> Structure {
        self.structure
    }
    pub fn a_op(&self) -> &Arc<dyn HermitianOperator> {
        &self.a
    }
    pub fn c_op(&self) -> &Arc<dyn HermitianOperator> {
        &self.c
    }
    pub fn shifted_solver(&self) -> Option<&Arc<dyn ShiftedSolver>> {
        self.solver.as_ref()
    }
    pub fn state_matrix(&self) -> Option<&Arc<StateMatrix>> {
        self.state.as_ref()
    }

    /// Whether `C` has eigenvalues of both signs. Matrix-free pairs are
    /// checked with Lanczos on first use.
    pub fn c_is_indefinite(&self) -> Result<bool, Error> {
        if let Some(v) = self.c_indefinite {
            return Ok(v);
        }
        if let Some((_, c)) = self.dense_mats() {
            let ev = linalg::hermitian_eigenvalues(c.as_ref())?;
            let tol = 1e-14 * self.c_norm;
            return Ok(ev[0] < -tol && ev[ev.len() - 1] > tol);
        }
        let n = self.dim();
        let opts = LanczosOptions::default();
        let hi = largest_eigenpairs(n, 1, |x, y| self.c.apply(x, y), &opts)?[0].0;
        let lo = smallest_eigenpairs(n, 1, |x, y| self.c.apply(x, y), &opts)?[0].0;
        let tol = 1e-14 * self.c_norm;
        Ok(lo < -tol && hi > tol)
    }

    pub fn dense_allowed(&self) -> bool {
        match self.structure {
            Structure::Dense => true,
            Structure::KroneckerRankOne => self.dim() <= KRONECKER_DENSE_LIMIT,
            Structure::DtiBlock => self.dim() <= DENSE_LIMIT,
        }
    }

    /// Dense copies of `(A, C)`, built lazily when the size allows it.
    pub fn dense_mats(&self) -> Option<&(Mat<C64>, Mat<C64>)> {
        if !self.dense_allowed() {
            return None;
        }
        Some(
            self.dense
                .get_or_init(|| (self.a.to_dense(), self.c.to_dense())),
        )
    }

    pub fn apply(&self, which: Which, x: &[C64]) -> Result<Vec<C64>, Error> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut y = vec![ZERO; n];
        match which {
            Which::A => self.a.apply(x, &mut y),
            Which::C => self.c.apply(x, &mut y),
            Which::Shifted(mu) => {
                self.a.apply(x, &mut y);
                if mu != 0.0 {
                    let mut t = vec![ZERO; n];
                    self.c.apply(x, &mut t);
                    linalg::axpy(C64::new(-mu, 0.0), &t, &mut y);
                }
            }
        }
        Ok(y)
    }

    /// Dense `A - mu C`, when materialization is allowed.
    pub fn shifted_dense(&self, mu: f64) -> Option<Mat<C64>> {
        let (a, c) = self.dense_mats()?;
        Some(Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
            a[(i, j)] - c[(i, j)] * mu
        }))
    }
}

/// `max |lambda|` of a Hermitian operator from a Lanczos run, inflated by 1%.
pub fn operator_norm_estimate(op: &dyn HermitianOperator) -> Result<f64, Error> {
    let n = op.dim();
    let opts = LanczosOptions {
        tol: 1e-8,
        max_dim: 50,
        ..Default::default()
    };
    let hi = largest_eigenpairs(n, 1, |x, y| op.apply(x, y), &opts)?[0].0;
    let lo = smallest_eigenpairs(n, 1, |x, y| op.apply(x, y), &opts)?[0].0;
    Ok(1.01 * hi.abs().max(lo.abs()))
}

/// Checks `<u, M v> = conj(<v, M u>)` on random vectors; returns the
/// largest defect relative to `scale`.
pub fn hermitian_defect(op: &dyn HermitianOperator, trials: usize, seed: u64) -> f64 {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rand_vec = |rng: &mut ChaCha8Rng| -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    };
    let mut worst = 0.0f64;
    let mut mu = vec![ZERO; n];
    let mut mv = vec![ZERO; n];
    for _ in 0..trials {
        let u = rand_vec(&mut rng);
        let v = rand_vec(&mut rng);
        op.apply(&v, &mut mv);
        op.apply(&u, &mut mu);
        let lhs = dotc(&u, &mv);
        let rhs = dotc(&v, &mu).conj();
        let scale = linalg::norm2(&u) * linalg::norm2(&v);
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dti_c_block_action() {
        let c = DtiBlockC { m: 1 };
        let mut y = vec![ZERO; 2];
        c.apply(&[linalg::ONE, ZERO], &mut y);
        assert_eq!(y, vec![ZERO, C64::new(0.0, -1.0)]);
    }

    #[test]
    fn combination_is_linear() {
        let a = Mat::<C64>::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(1.0 + i as f64, 0.0)
            } else {
                C64::new(0.0, 0.5 * (i as f64 - j as f64))
            }
        });
        let op: Arc<dyn HermitianOperator> = Arc::new(DenseHermitian::new(a).unwrap());
        let comb = Combination::new(vec![(2.0, op.clone()), (-0.5, op)]).unwrap();
        let x = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let mut y = vec![ZERO; 2];
        comb.apply(&x, &mut y);
        // 1.5 * A x
        assert!((y[0] - C64::new(1.5, 0.0) * (x[0] + C64::new(0.0, -0.5) * x[1])).norm() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = Mat::<C64>::from_fn(2, 2, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        assert!(DenseHermitian::new(m).is_err());
    }
}
