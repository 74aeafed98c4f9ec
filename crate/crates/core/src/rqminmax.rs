//! Minimax of two Rayleigh quotients,
//!
//! ```text
//! min_{x != 0} max(x^H A x / x^H x, x^H B x / x^H x),
//! ```
//!
//! solved through `max_mu lambda_min(A - mu C)` with `C = A - B` by a
//! bisection on `[0, 1]` that restarts 2DRQI at each midpoint.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::history::ConvergenceHistory;
use crate::krylov::{smallest_eigenpairs, LanczosOptions};
use crate::linalg::{self, dotc, norm2, ZERO};
use crate::ops::{
    operator_norm_estimate, Combination, HermitianOperator, HermitianPair, Structure, Which,
};
use crate::twodrqi::{
    definite_direction, project, solve_2x2_2devp, two_drqi, SolverOptions, Status, TwoDTriplet,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RqMinmaxOptions {
    /// Relative threshold for accepting `lambda_hat = lambda_min(A - mu_hat C)`.
    pub reltol: f64,
    /// 2DRQI tolerance; `None` means `n · eps`.
    pub backtol: Option<f64>,
    /// Bracket width below which the vector is recovered by interpolation.
    pub abstol: f64,
    pub max_outer: usize,
    /// Iteration cap for each inner 2DRQI run.
    pub inner_maxit: usize,
    pub rng_seed: u64,
}

impl Default for RqMinmaxOptions {
    fn default() -> Self {
        Self {
            reltol: 1e-8,
            backtol: None,
            abstol: 1e-12,
            max_outer: 60,
            inner_maxit: 20,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
    #[serde(rename = "III-rqi")]
    IIIRqi,
    #[serde(rename = "III-recovery")]
    IIIRecovery,
}

impl Case {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::IIIRqi => "III-rqi",
            Self::IIIRecovery => "III-recovery",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Classification {
    /// `lambda_min(A) >= rho_B(x_A)`.
    CaseI {
        lambda: f64,
        x: Vec<C64>,
    },
    /// `lambda_min(B) >= rho_A(x_B)`.
    CaseII {
        lambda: f64,
        x: Vec<C64>,
    },
    CaseIII {
        x_a: Vec<C64>,
        x_b: Vec<C64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinmaxStatus {
    Solved,
    /// `max_outer` reached before the bracket shrank below `abstol`.
    MaxOuter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RqMinmaxResult {
    pub x_opt: Vec<C64>,
    pub value: f64,
    pub case_taken: Case,
    pub mu_opt: Option<f64>,
    pub outer_iters: usize,
    pub status: MinmaxStatus,
    /// Bracket `[a, b]` at the start of each outer iteration.
    pub brackets: Vec<(f64, f64)>,
    /// History of the accepted 2DRQI run.
    pub history: Option<ConvergenceHistory>,
}

/// The operators `A`, `B` together with the pair `(A, A - B)`.
#[derive(Debug, Clone)]
pub struct MinmaxProblem {
    a: Arc<dyn HermitianOperator>,
    b: Arc<dyn HermitianOperator>,
    pair: HermitianPair,
    a_norm: f64,
    b_norm: f64,
}

impl MinmaxProblem {
    pub fn new(
        a: Arc<dyn HermitianOperator>,
        b: Arc<dyn HermitianOperator>,
        structure: Structure,
    ) -> Result<Self, Error> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        let c = Combination::new(vec![(1.0, a.clone()), (-1.0, b.clone())])?;
        let pair = HermitianPair::from_operators(a.clone(), Arc::new(c), structure)?;
        let (a_norm, b_norm) = if pair.dense_allowed() {
            (
                linalg::hermitian_norm(a.to_dense().as_ref())?,
                linalg::hermitian_norm(b.to_dense().as_ref())?,
            )
        } else {
            (
                operator_norm_estimate(a.as_ref())?,
                operator_norm_estimate(b.as_ref())?,
            )
        };
        Ok(Self {
            a,
            b,
            pair,
            a_norm,
            b_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.pair.dim()
    }
    pub fn pair(&self) -> &HermitianPair {
        &self.pair
    }
    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }
    pub fn b_norm(&self) -> f64 {
        self.b_norm
    }

    pub fn rho_a(&self, x: &[C64]) -> f64 {
        rayleigh(self.a.as_ref(), x)
    }
    pub fn rho_b(&self, x: &[C64]) -> f64 {
        rayleigh(self.b.as_ref(), x)
    }

    /// The `k` smallest eigenpairs of `A - mu C = (1 - mu) A + mu B`,
    /// ascending.
    pub fn smallest_eigenpairs(&self, mu: f64, k: usize) -> Result<Vec<(f64, Vec<C64>)>, Error> {
        if let Some(h) = self.pair.shifted_dense(mu) {
            let (vals, vecs) = linalg::hermitian_eig(h.as_ref())?;
            return Ok((0..k)
                .map(|i| (vals[i], linalg::col_to_vec(vecs.as_ref(), i)))
                .collect());
        }
        let opts = LanczosOptions {
            tol: 1e-10,
            ..Default::default()
        };
        smallest_eigenpairs(
            self.dim(),
            k,
            |x, y| y.copy_from_slice(&self.pair.apply(Which::Shifted(mu), x).expect("sized")),
            &opts,
        )
    }

    /// `g(mu) = lambda_min(A - mu C)`.
    pub fn lambda_min(&self, mu: f64) -> Result<f64, Error> {
        if let Some(h) = self.pair.shifted_dense(mu) {
            return Ok(linalg::hermitian_eigenvalues(h.as_ref())?[0]);
        }
        Ok(self.smallest_eigenpairs(mu, 1)?[0].0)
    }
}

fn rayleigh(op: &dyn HermitianOperator, x: &[C64]) -> f64 {
    let mut y = vec![ZERO; x.len()];
    op.apply(x, &mut y);
    dotc(x, &y).re / dotc(x, x).re
}

pub fn classify_cases(p: &MinmaxProblem) -> Result<Classification, Error> {
    let (la, xa) = p.smallest_eigenpairs(0.0, 1)?.remove(0);
    if la >= p.rho_b(&xa) {
        return Ok(Classification::CaseI { lambda: la, x: xa });
    }
    let (lb, xb) = p.smallest_eigenpairs(1.0, 1)?.remove(0);
    if lb >= p.rho_a(&xb) {
        return Ok(Classification::CaseII { lambda: lb, x: xb });
    }
    Ok(Classification::CaseIII { x_a: xa, x_b: xb })
}

/// 2DRQI initial at `mu0`: the minimum 2D Ritz triplet on the span of the
/// two lowest eigenvectors, with `lambda0` the lowest eigenvalue.
fn initial_at(
    p: &MinmaxProblem,
    mu0: f64,
    pairs: &[(f64, Vec<C64>)],
    seed: u64,
) -> Result<TwoDTriplet, Error> {
    let proj = project(&p.pair, &pairs[1].1, &pairs[0].1)?;
    let x0 = if proj.is_indefinite() {
        let cands = solve_2x2_2devp(&proj)?;
        let best = cands
            .iter()
            .min_by(|u, v| u.theta.total_cmp(&v.theta))
            .expect("at least one candidate");
        (0..p.dim())
            .map(|i| proj.v[(i, 0)] * best.z[0] + proj.v[(i, 1)] * best.z[1])
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        definite_direction(&proj, &mut rng).0
    };
    TwoDTriplet::new(mu0, pairs[0].0, x0)
}

pub fn rqminmax_solve(p: &MinmaxProblem, opts: &RqMinmaxOptions) -> Result<RqMinmaxResult, Error> {
    let (mut x_left, mut x_right) = match classify_cases(p)? {
        Classification::CaseI { lambda, x } => return Ok(early(x, lambda, Case::I)),
        Classification::CaseII { lambda, x } => return Ok(early(x, lambda, Case::II)),
        Classification::CaseIII { x_a, x_b } => (x_a, x_b),
    };
    let pair = p.pair.clone().with_indefinite_c();
    let inner = SolverOptions {
        tol: opts.backtol,
        maxit: opts.inner_maxit,
        rng_seed: opts.rng_seed,
        ..Default::default()
    };
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut brackets = Vec::new();
    for k in 0..opts.max_outer {
        brackets.push((a, b));
        let mu0 = 0.5 * (a + b);
        let pairs = p.smallest_eigenpairs(mu0, 2)?;
        let init = initial_at(p, mu0, &pairs, opts.rng_seed.wrapping_add(k as u64))?;
        let run = two_drqi(&pair, init, &inner)?;
        if run.status == Status::Converged {
            let t = &run.triplet;
            let gap = (t.lambda - p.lambda_min(t.mu)?).abs();
            if gap < opts.reltol * ((1.0 - t.mu).abs() * p.a_norm + t.mu.abs() * p.b_norm) {
                return Ok(RqMinmaxResult {
                    x_opt: t.x.clone(),
                    value: t.lambda,
                    case_taken: Case::IIIRqi,
                    mu_opt: Some(t.mu),
                    outer_iters: k + 1,
                    status: MinmaxStatus::Solved,
                    brackets,
                    history: Some(run.history),
                });
            }
        }
        let xn = &pairs[0].1;
        let cx = p.pair.apply(Which::C, xn)?;
        if dotc(xn, &cx).re <= 0.0 {
            a = mu0;
            x_left = xn.clone();
        } else {
            b = mu0;
            x_right = xn.clone();
        }
        if b - a < opts.abstol {
            let mu = 0.5 * (a + b);
            let (x, _) = recover_x(&x_left, &x_right, &p.pair)?;
            return Ok(RqMinmaxResult {
                x_opt: x,
                value: p.lambda_min(mu)?,
                case_taken: Case::IIIRecovery,
                mu_opt: Some(mu),
                outer_iters: k + 1,
                status: MinmaxStatus::Solved,
                brackets,
                history: None,
            });
        }
    }
    let mu = 0.5 * (a + b);
    let (x, _) = recover_x(&x_left, &x_right, &p.pair)?;
    Ok(RqMinmaxResult {
        x_opt: x,
        value: p.lambda_min(mu)?,
        case_taken: Case::IIIRecovery,
        mu_opt: Some(mu),
        outer_iters: opts.max_outer,
        status: MinmaxStatus::MaxOuter,
        brackets,
        history: None,
    })
}

fn early(x: Vec<C64>, value: f64, case: Case) -> RqMinmaxResult {
    RqMinmaxResult {
        x_opt: x,
        value,
        case_taken: case,
        mu_opt: None,
        outer_iters: 0,
        status: MinmaxStatus::Solved,
        brackets: Vec::new(),
        history: None,
    }
}

/// Interpolates between unit vectors `x_a` and `x_b` with `x^H C x` of
/// opposite signs to find `x_hat` with `x_hat^H C x_hat ≈ 0`. Returns the
/// vector and the angle from `x_a`.
pub fn recover_x(x_a: &[C64], x_b: &[C64], pair: &HermitianPair) -> Result<(Vec<C64>, f64), Error> {
    let n = pair.dim();
    if x_a.len() != n || x_b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x_a.len().min(x_b.len()),
        });
    }
    let mut qa = x_a.to_vec();
    let mut xb = x_b.to_vec();
    linalg::normalize(&mut qa);
    linalg::normalize(&mut xb);
    let tol = 1e-12 * pair.c_norm();
    let h = |u: &[C64]| -> Result<f64, Error> { Ok(dotc(u, &pair.apply(Which::C, u)?).re) };
    let ha = h(&qa)?;
    if ha.abs() <= tol {
        return Ok((qa, 0.0));
    }
    // phase so that x_a^H x_b is real and nonnegative
    let ip = dotc(&qa, &xb);
    if ip.norm() > 0.0 {
        let ph = ip.conj() / ip.norm();
        linalg::scale(&mut xb, ph);
    }
    let hb = h(&xb)?;
    let cos_b = dotc(&qa, &xb).re.clamp(-1.0, 1.0);
    let theta_b = cos_b.acos();
    if hb.abs() <= tol {
        return Ok((xb, theta_b));
    }
    let mut qb = xb.clone();
    for _ in 0..2 {
        let s = dotc(&qa, &qb);
        linalg::axpy(-s, &qa, &mut qb);
    }
    if norm2(&qb) <= 1e-14 {
        return Ok((qa, 0.0));
    }
    linalg::normalize(&mut qb);
    if ha.signum() == hb.signum() {
        return Err(Error::RecoveryFailed(format!(
            "x^H C x has the same sign at both ends ({ha:e}, {hb:e})"
        )));
    }
    let u = |t: f64| -> Vec<C64> {
        qa.iter()
            .zip(&qb)
            .map(|(p, q)| p * t.cos() + q * t.sin())
            .collect()
    };
    let (mut lo, mut hi) = (0.0, theta_b);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let hm = h(&u(mid))?;
        if hm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if hm.signum() == ha.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut x = u(theta);
    linalg::normalize(&mut x);
    Ok((x, theta))
}

/// Dense helper for tests and examples: the problem for explicit matrices.
pub fn dense_problem(a: faer::Mat<C64>, b: faer::Mat<C64>) -> Result<MinmaxProblem, Error> {
    use crate::ops::DenseHermitian;
    MinmaxProblem::new(
        Arc::new(DenseHermitian::new(a)?),
        Arc::new(DenseHermitian::new(b)?),
        Structure::Dense,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    fn diag(d: &[f64]) -> Mat<C64> {
        Mat::from_fn(d.len(), d.len(), |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    #[test]
    fn case_two_on_diagonal_pair() {
        let p = dense_problem(diag(&[1.0, 2.0]), diag(&[3.0, 4.0])).unwrap();
        match classify_cases(&p).unwrap() {
            Classification::CaseII { lambda, x } => {
                assert_eq!(lambda, 3.0);
                assert!((x[0].norm() - 1.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symmetric_case_three() {
        let p = dense_problem(diag(&[1.0, -1.0]), diag(&[-1.0, 1.0])).unwrap();
        assert!(matches!(
            classify_cases(&p).unwrap(),
            Classification::CaseIII { .. }
        ));
        let r = rqminmax_solve(&p, &RqMinmaxOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-12, "{}", r.value);
        assert!((r.mu_opt.unwrap() - 0.5).abs() < 1e-12);
        assert!((r.x_opt[0].norm() - r.x_opt[1].norm()).abs() < 1e-12);
    }

    #[test]
    fn recovery_on_closed_form() {
        let c = diag(&[-1.0, 1.0]);
        let pair = HermitianPair::dense(c.clone(), c).unwrap();
        let (x, theta) = recover_x(&linalg::unit(2, 0), &linalg::unit(2, 1), &pair).unwrap();
        assert!((theta - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x[0].re - s).abs() < 1e-15 && (x[1].re - s).abs() < 1e-15);
        // neutral endpoint returned as is
        let z = linalg::real_vec(&[s, s]);
        let (x, theta) = recover_x(&z, &linalg::unit(2, 1), &pair).unwrap();
        assert!(theta == 0.0 && norm2(&linalg::sub(&x, &z)) < 1e-15);
        // same sign at both ends
        let e = linalg::real_vec(&[0.1, 1.0]);
        assert!(matches!(
            recover_x(&e, &linalg::unit(2, 1), &pair),
            Err(Error::RecoveryFailed(_))
        ));
    }
}
