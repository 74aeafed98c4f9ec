//! Distance to instability of a stable matrix `Â`,
//!
//! ```text
//! beta(Â) = min_mu sigma_min(Â - mu j I),
//! ```
//!
//! computed as the smallest positive 2D-eigenvalue `lambda` of the block
//! pair `A = [[0, Â], [Â^H, 0]]`, `C = [[0, jI], [-jI, 0]]`.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::history::ConvergenceHistory;
use crate::linalg::{self, dotc, norm2};
use crate::ops::HermitianPair;
use crate::state::StateMatrix;
use crate::twodrqi::{two_drqi_with_hook, ErrorMetric, SolverOptions, Status, TwoDTriplet};

/// Largest `m` for which the Hamiltonian validation is attempted.
pub const VALIDATION_LIMIT: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtiOptions {
    /// Threshold for both `eta2` and `|imag(x1^H x2)|`; `None` means `2m · eps`.
    pub tol: Option<f64>,
    /// Validation margin: `G((1 - reltol) lambda_hat)` is tested.
    pub reltol: f64,
    pub maxit: usize,
    pub validate: bool,
    pub stagnation_check: bool,
    /// Eigenvalues of `G` with `|re| <= imag_axis_tol ‖Â‖` count as imaginary.
    pub imag_axis_tol: f64,
}

impl Default for DtiOptions {
    fn default() -> Self {
        Self {
            tol: None,
            reltol: 1e-9,
            maxit: 20,
            validate: false,
            stagnation_check: true,
            imag_axis_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validation {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtiInitial {
    pub mu0: f64,
    pub lambda0: f64,
    pub rightmost: C64,
    pub x0: Vec<C64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtiResult {
    pub beta_hat: f64,
    pub mu_hat: f64,
    pub lambda_hat: f64,
    /// The iteration ended at `lambda_hat < 0`; `beta_hat = -lambda_hat`.
    pub negated: bool,
    pub x_hat: Vec<C64>,
    pub eta2: f64,
    pub eta1: f64,
    pub status: Status,
    pub iterations: usize,
    pub validated: Validation,
    pub initial: DtiInitial,
    pub history: ConvergenceHistory,
}

/// Starting triplet: `mu0 = imag` of the rightmost eigenvalue of `Â` and the
/// smallest singular triplet `(Â - mu0 j I) v = lambda0 u`,
/// `x0 = [u; v] / sqrt(2)`.
pub fn dti_initial(ahat: &StateMatrix) -> Result<DtiInitial, Error> {
    let rightmost = ahat.rightmost_eigenvalue()?;
    if !(rightmost.re < 0.0) {
        return Err(Error::NotStable(rightmost.re));
    }
    let mu0 = rightmost.im;
    let (sigma, u, v) = ahat.sigma_min_triplet(mu0)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x0 = u.iter().chain(&v).map(|c| c * s).collect();
    Ok(DtiInitial {
        mu0,
        lambda0: sigma,
        rightmost,
        x0,
    })
}

/// Rescales both halves of `x` to norm `1/sqrt(2)`. Fails on a zero half.
pub fn balance_halves(x: &mut [C64]) -> bool {
    let m = x.len() / 2;
    let (x1, x2) = x.split_at_mut(m);
    let (n1, n2) = (norm2(x1), norm2(x2));
    if !(n1 > 0.0 && n2 > 0.0 && n1.is_finite() && n2.is_finite()) {
        return false;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    linalg::scale(x1, C64::new(s / n1, 0.0));
    linalg::scale(x2, C64::new(s / n2, 0.0));
    true
}

/// `imag(x1^H x2)` and `‖x1‖² - ‖x2‖²` for `x = [x1; x2]`.
pub fn half_relations(x: &[C64]) -> (f64, f64) {
    let m = x.len() / 2;
    let (x1, x2) = x.split_at(m);
    (dotc(x1, x2).im, dotc(x1, x1).re - dotc(x2, x2).re)
}

pub fn dti_solve(ahat: Arc<StateMatrix>, opts: &DtiOptions) -> Result<DtiResult, Error> {
    let initial = dti_initial(&ahat)?;
    let pair = HermitianPair::dti(ahat.clone())?;
    let m = ahat.dim();
    let solver = SolverOptions {
        tol: Some(opts.tol.unwrap_or(2.0 * m as f64 * f64::EPSILON)),
        maxit: opts.maxit,
        metric: ErrorMetric::Eta2,
        stagnation_check: opts.stagnation_check,
        rng_seed: 0,
    };
    let init = TwoDTriplet::new(initial.mu0, initial.lambda0, initial.x0.clone())?;
    let run = two_drqi_with_hook(&pair, init, &solver, |t| balance_halves(&mut t.x))?;
    let t = &run.triplet;
    let negated = t.lambda < 0.0;
    let beta_hat = t.lambda.abs();
    let validated = if opts.validate {
        validate_dti(&ahat, beta_hat, opts.reltol, opts.imag_axis_tol)?
    } else {
        Validation::Skipped
    };
    Ok(DtiResult {
        beta_hat,
        mu_hat: t.mu,
        lambda_hat: t.lambda,
        negated,
        x_hat: t.x.clone(),
        eta2: run.report.eta2.unwrap_or(f64::NAN),
        eta1: run.report.eta1,
        status: run.status,
        iterations: run.iterations,
        validated,
        initial,
        history: run.history,
    })
}

/// Checks that `G(l) = [[Â, -l I], [l I, -Â^H]]` with
/// `l = (1 - reltol) lambda_hat` has no eigenvalue on the imaginary axis,
/// which certifies `l < beta(Â)`.
pub fn validate_dti(
    ahat: &StateMatrix,
    lambda_hat: f64,
    reltol: f64,
    imag_axis_tol: f64,
) -> Result<Validation, Error> {
    let m = ahat.dim();
    if m > VALIDATION_LIMIT {
        return Ok(Validation::Skipped);
    }
    let l = (1.0 - reltol) * lambda_hat;
    let a = ahat.to_dense();
    let g = Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, true) => a[(i, j)],
        (true, false) => C64::new(if i == j - m { -l } else { 0.0 }, 0.0),
        (false, true) => C64::new(if i - m == j { l } else { 0.0 }, 0.0),
        (false, false) => -a[(j - m, i - m)].conj(),
    });
    let ev = linalg::eigenvalues(g.as_ref())?;
    let thresh = imag_axis_tol * ahat.norm()?;
    Ok(if ev.iter().any(|z| z.re.abs() <= thresh) {
        Validation::Failed
    } else {
        Validation::Passed
    })
}

/// `(beta_true - beta_hat) / ‖Â‖`: the backward error of an estimate
/// measured only through the value. Needs the true DTI, so it serves as a
/// check and not as a stopping criterion.
pub fn naive_backward_error(ahat_norm: f64, beta_true: f64, beta_hat: f64) -> Result<f64, Error> {
    if beta_true < beta_hat {
        return Err(Error::InvalidArgument(format!(
            "beta_true {beta_true} is below beta_hat {beta_hat}"
        )));
    }
    if !(ahat_norm > 0.0) {
        return Err(Error::InvalidArgument("norm must be positive".into()));
    }
    Ok((beta_true - beta_hat) / ahat_norm)
}
