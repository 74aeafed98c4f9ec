//! Rayleigh-quotient-like iteration for the 2D eigenvalue problem
//!
//! ```text
//! (A - mu C) x = lambda x,   x^H C x = 0,   ‖x‖ = 1
//! ```
//!
//! Each step solves the bordered Jacobian system for a two-column basis,
//! projects `(A, C)` onto it, and picks the next iterate from the 2×2
//! projected problem.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backward_error::{eta1, eta2_dti, BackwardErrorReport};
use crate::error::Error;
use crate::history::{Branch, ConvergenceHistory, IterationRecord};
use crate::krylov::gmres;
use crate::linalg::{self, dotc, norm2, ONE, ZERO};
use crate::ops::{HermitianPair, Which};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoDTriplet {
    pub mu: f64,
    pub lambda: f64,
    pub x: Vec<C64>,
}

impl TwoDTriplet {
    /// Builds a triplet with `x` normalized to unit length.
    pub fn new(mu: f64, lambda: f64, mut x: Vec<C64>) -> Result<Self, Error> {
        if !(mu.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidArgument(
                "mu and lambda must be finite".into(),
            ));
        }
        let nrm = linalg::normalize(&mut x);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::InvalidArgument(
                "x must be a nonzero finite vector".into(),
            ));
        }
        Ok(Self { mu, lambda, x })
    }
}

/// The 2×2 projection `(V^H A V, V^H C V)` with `V^H C V = diag(c1, c2)`,
/// `c1 >= c2`.
#[derive(Debug, Clone)]
pub struct ProjectedPair {
    /// Orthonormal `n × 2` basis.
    pub v: Mat<C64>,
    pub a11: f64,
    pub a12: C64,
    pub a22: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ProjectedPair {
    pub fn is_indefinite(&self) -> bool {
        self.c1 > 0.0 && self.c2 < 0.0
    }

    fn lift(&self, z: [C64; 2]) -> Vec<C64> {
        (0..self.v.nrows())
            .map(|i| self.v[(i, 0)] * z[0] + self.v[(i, 1)] * z[1])
            .collect()
    }
}

/// A 2D-eigentriplet of a projected pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub nu: f64,
    pub theta: f64,
    pub z: [C64; 2],
}

/// Dense bordered Jacobian
/// `[[A - mu C - lambda I, -C x, -x], [-x^H C, 0, 0], [-x^H, 0, 0]]`.
pub fn jacobian_dense(pair: &HermitianPair, t: &TwoDTriplet) -> Option<Mat<C64>> {
    let (a, c) = pair.dense_mats()?;
    let n = pair.dim();
    let cx = pair.apply(Which::C, &t.x).ok()?;
    Some(Mat::from_fn(n + 2, n + 2, |i, j| match (i < n, j < n) {
        (true, true) => {
            let d = if i == j { t.lambda } else { 0.0 };
            a[(i, j)] - c[(i, j)] * t.mu - C64::new(d, 0.0)
        }
        (true, false) => -if j == n { cx[i] } else { t.x[i] },
        (false, true) => -if i == n { cx[j].conj() } else { t.x[j].conj() },
        (false, false) => ZERO,
    }))
}

const REFINEMENT_STEPS: usize = 3;

/// Solves `J [X; u; v] = [0; I_2]` and returns the `n × 2` block `X`.
///
/// Dense pairs factor `J` directly. Pairs with a structured shifted solver
/// use block elimination `X = Z (U^H Z)^{-1}`, `Z = H^{-1} U`,
/// `U = [-C x, -x]`, followed by a few steps of iterative refinement. Other
/// matrix-free pairs fall back to GMRES on `J`.
pub fn solve_augmented(pair: &HermitianPair, t: &TwoDTriplet) -> Result<Mat<C64>, Error> {
    let n = pair.dim();
    if t.x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.x.len(),
        });
    }
    let xa = if let Some(solver) = pair.shifted_solver() {
        let f = solver.factor(t.mu, t.lambda)?;
        solve_bordered_structured(pair, t, |v| f.solve_in_place(v))?
    } else if let Some(j) = jacobian_dense(pair, t) {
        let lu = j.partial_piv_lu();
        let u = lu.U();
        let scale = (0..n + 2)
            .flat_map(|i| (0..n + 2).map(move |k| (i, k)))
            .fold(0.0f64, |s, (i, k)| s.max(j[(i, k)].norm()));
        if (0..n + 2).any(|i| !(u[(i, i)].norm() >= 1e-14 * scale)) {
            return Err(Error::JacobianSingular);
        }
        let mut rhs = Mat::<C64>::zeros(n + 2, 2);
        rhs[(n, 0)] = ONE;
        rhs[(n + 1, 1)] = ONE;
        lu.solve_in_place(&mut rhs);
        Mat::from_fn(n, 2, |i, k| rhs[(i, k)])
    } else {
        solve_bordered_gmres(pair, t)?
    };
    if xa
        .col_iter()
        .any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()))
    {
        return Err(Error::JacobianSingular);
    }
    Ok(xa)
}

fn apply_jacobian(
    pair: &HermitianPair,
    t: &TwoDTriplet,
    cx: &[C64],
    x: &[C64],
    u: [C64; 2],
) -> Result<(Vec<C64>, [C64; 2]), Error> {
    let mut top = pair.apply(Which::Shifted(t.mu), x)?;
    for i in 0..x.len() {
        top[i] -= x[i] * t.lambda + cx[i] * u[0] + t.x[i] * u[1];
    }
    Ok((top, [-dotc(cx, x), -dotc(&t.x, x)]))
}

fn solve_bordered_structured<F>(
    pair: &HermitianPair,
    t: &TwoDTriplet,
    solve_h: F,
) -> Result<Mat<C64>, Error>
where
    F: Fn(&mut [C64]),
{
    let n = pair.dim();
    let cx = pair.apply(Which::C, &t.x)?;
    let ucols: [Vec<C64>; 2] = [
        cx.iter().map(|v| -v).collect(),
        t.x.iter().map(|v| -v).collect(),
    ];
    let z: Vec<Vec<C64>> = ucols
        .iter()
        .map(|u| {
            let mut w = u.clone();
            solve_h(&mut w);
            w
        })
        .collect();
    // S = U^H Z
    let s = [
        [dotc(&ucols[0], &z[0]), dotc(&ucols[0], &z[1])],
        [dotc(&ucols[1], &z[0]), dotc(&ucols[1], &z[1])],
    ];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    if det == ZERO || !det.re.is_finite() || !det.im.is_finite() {
        return Err(Error::JacobianSingular);
    }
    let sinv = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    // full solution of J [X; w] = [F; G] by block elimination
    let block_solve = |f: &[Vec<C64>; 2], g: [[C64; 2]; 2]| -> (Vec<Vec<C64>>, [[C64; 2]; 2]) {
        // y = H^{-1} F,  w = S^{-1} (U^H y - G),  X = y - Z w
        let y: Vec<Vec<C64>> = f
            .iter()
            .map(|fc| {
                let mut w = fc.clone();
                solve_h(&mut w);
                w
            })
            .collect();
        let mut xs = Vec::with_capacity(2);
        let mut ws = [[ZERO; 2]; 2];
        for k in 0..2 {
            let b = [
                dotc(&ucols[0], &y[k]) - g[0][k],
                dotc(&ucols[1], &y[k]) - g[1][k],
            ];
            let w = [
                sinv[0][0] * b[0] + sinv[0][1] * b[1],
                sinv[1][0] * b[0] + sinv[1][1] * b[1],
            ];
            let mut xk = y[k].clone();
            linalg::axpy(-w[0], &z[0], &mut xk);
            linalg::axpy(-w[1], &z[1], &mut xk);
            ws[0][k] = w[0];
            ws[1][k] = w[1];
            xs.push(xk);
        }
        (xs, ws)
    };
    let zero = vec![ZERO; n];
    let (mut xs, mut ws) = block_solve(&[zero.clone(), zero], [[ONE, ZERO], [ZERO, ONE]]);
    // iterative refinement with residuals from the exact operator products
    for _ in 0..REFINEMENT_STEPS {
        let mut rf: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
        let mut rg = [[ZERO; 2]; 2];
        for k in 0..2 {
            let (top, bottom) = apply_jacobian(pair, t, &cx, &xs[k], [ws[0][k], ws[1][k]])?;
            rf[k] = top.iter().map(|v| -v).collect();
            rg[0][k] = if k == 0 { ONE } else { ZERO } - bottom[0];
            rg[1][k] = if k == 1 { ONE } else { ZERO } - bottom[1];
        }
        let (dx, dw) = block_solve(&rf, rg);
        for k in 0..2 {
            linalg::axpy(ONE, &dx[k], &mut xs[k]);
            ws[0][k] += dw[0][k];
            ws[1][k] += dw[1][k];
        }
    }
    Ok(Mat::from_fn(n, 2, |i, k| xs[k][i]))
}

fn solve_bordered_gmres(pair: &HermitianPair, t: &TwoDTriplet) -> Result<Mat<C64>, Error> {
    let n = pair.dim();
    let cx = pair.apply(Which::C, &t.x)?;
    let mut out = Mat::<C64>::zeros(n, 2);
    for k in 0..2 {
        let mut b = vec![ZERO; n + 2];
        b[n + k] = ONE;
        let op = |v: &[C64], y: &mut [C64]| {
            let (top, bottom) = apply_jacobian(pair, t, &cx, &v[..n], [v[n], v[n + 1]])
                .expect("dimensions checked");
            y[..n].copy_from_slice(&top);
            y[n] = bottom[0];
            y[n + 1] = bottom[1];
        };
        let (sol, _) = gmres(&b, op, 1e-12, 500);
        for i in 0..n {
            out[(i, k)] = sol[i];
        }
    }
    Ok(out)
}

/// Orthonormalizes the two columns of `xa` and rotates the basis so that
/// `V^H C V = diag(c1, c2)` with `c1 >= c2`.
pub fn orthonormalize_and_align(
    pair: &HermitianPair,
    xa: &Mat<C64>,
) -> Result<ProjectedPair, Error> {
    let n = xa.nrows();
    if xa.ncols() != 2 || n != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: n,
        });
    }
    let c0 = linalg::col_to_vec(xa.as_ref(), 0);
    let c1 = linalg::col_to_vec(xa.as_ref(), 1);
    // column-pivoted Gram-Schmidt: larger column first
    let (p, q) = if norm2(&c0) >= norm2(&c1) {
        (c0, c1)
    } else {
        (c1, c0)
    };
    let mut q1 = p;
    let r11 = linalg::normalize(&mut q1);
    let mut q2 = q;
    let mut r12 = ZERO;
    for _ in 0..2 {
        let h = dotc(&q1, &q2);
        r12 += h;
        linalg::axpy(-h, &q1, &mut q2);
    }
    let r22 = linalg::normalize(&mut q2);
    // singular values of R = [[r11, r12], [0, r22]]
    let fro2 = r11 * r11 + r12.norm_sqr() + r22 * r22;
    let det = r11 * r22;
    let disc = ((fro2 * fro2 - 4.0 * det * det).max(0.0)).sqrt();
    let smax = (0.5 * (fro2 + disc)).sqrt();
    let smin = if smax > 0.0 { det / smax } else { 0.0 };
    if !(smax > 0.0) || !(smin > 1e-12 * smax) {
        return Err(Error::DegenerateBasis);
    }
    project(pair, &q1, &q2)
}

/// Projects onto the orthonormal pair `(q1, q2)` and diagonalizes the `C`
/// block.
pub fn project(pair: &HermitianPair, q1: &[C64], q2: &[C64]) -> Result<ProjectedPair, Error> {
    let cq1 = pair.apply(Which::C, q1)?;
    let cq2 = pair.apply(Which::C, q2)?;
    let (c1, c2, rot) =
        linalg::hermitian_eig_2x2(dotc(q1, &cq1).re, dotc(q1, &cq2), dotc(q2, &cq2).re);
    let n = q1.len();
    let v = Mat::from_fn(n, 2, |i, k| q1[i] * rot[2 * k] + q2[i] * rot[2 * k + 1]);
    let v0 = linalg::col_to_vec(v.as_ref(), 0);
    let v1 = linalg::col_to_vec(v.as_ref(), 1);
    let av0 = pair.apply(Which::A, &v0)?;
    let av1 = pair.apply(Which::A, &v1)?;
    Ok(ProjectedPair {
        a11: dotc(&v0, &av0).re,
        a12: dotc(&v0, &av1),
        a22: dotc(&v1, &av1).re,
        c1,
        c2,
        v,
    })
}

/// 2D-eigentriplets of an indefinite projected pair: two candidates, or one
/// when `|a12| < 1e-14 ‖A_k‖_F`.
pub fn solve_2x2_2devp(p: &ProjectedPair) -> Result<Vec<Candidate>, Error> {
    if !p.is_indefinite() {
        return Err(Error::InvalidArgument(format!(
            "projected C is not indefinite: ({}, {})",
            p.c1, p.c2
        )));
    }
    let (c1, c2) = (p.c1, p.c2);
    let gap = c1 - c2;
    let pp = (-c2 / gap).sqrt();
    let qq = (c1 / gap).sqrt();
    let b = p.a12.norm();
    let ak_fro = (p.a11 * p.a11 + p.a22 * p.a22 + 2.0 * b * b).sqrt();
    if b < 1e-14 * ak_fro || b == 0.0 {
        let nu = (p.a11 - p.a22) / gap;
        let theta = (p.a22 * c1 - p.a11 * c2) / gap;
        return Ok(vec![Candidate {
            nu,
            theta,
            z: [C64::new(pp, 0.0), C64::new(qq, 0.0)],
        }]);
    }
    let phase = C64::new(b, 0.0) / p.a12;
    let p2 = pp * pp;
    let q2 = qq * qq;
    let pq = pp * qq;
    let cz2 = c1 * c1 * p2 + c2 * c2 * q2;
    Ok([1.0, -1.0]
        .iter()
        .map(|&s| {
            let theta = p2 * p.a11 + q2 * p.a22 + 2.0 * pq * s * b;
            let nu = (c1 * p.a11 * p2 + c2 * p.a22 * q2 + (c1 + c2) * pq * s * b) / cz2;
            Candidate {
                nu,
                theta,
                z: [C64::new(pp, 0.0), phase * (s * qq)],
            }
        })
        .collect())
}

/// Candidate closest to `(mu, lambda)` in `|mu - nu| + |lambda - theta|`;
/// ties go to the first.
pub fn nearest_candidate(cands: &[Candidate], mu: f64, lambda: f64) -> Candidate {
    let mut best = cands[0];
    let mut dist = (mu - best.nu).abs() + (lambda - best.theta).abs();
    for c in &cands[1..] {
        let d = (mu - c.nu).abs() + (lambda - c.theta).abs();
        if d < dist {
            best = *c;
            dist = d;
        }
    }
    best
}

/// Next iterate from an indefinite projection.
pub fn update_indefinite(
    p: &ProjectedPair,
    mu: f64,
    lambda: f64,
) -> Result<(TwoDTriplet, Branch), Error> {
    let cands = solve_2x2_2devp(p)?;
    let branch = if cands.len() == 1 {
        Branch::IndefiniteMultiple
    } else {
        Branch::IndefiniteSimple
    };
    let c = nearest_candidate(&cands, mu, lambda);
    Ok((
        TwoDTriplet {
            mu: c.nu,
            lambda: c.theta,
            x: p.lift(c.z),
        },
        branch,
    ))
}

/// Direction chosen from a definite projection: the basis vector with the
/// smaller `|c_i|`, or a random combination when `c1 = c2`.
pub fn definite_direction(p: &ProjectedPair, rng: &mut impl Rng) -> (Vec<C64>, Branch) {
    if p.c1.abs() < p.c2.abs() {
        (p.lift([ONE, ZERO]), Branch::DefiniteDistinct)
    } else if p.c1.abs() > p.c2.abs() {
        (p.lift([ZERO, ONE]), Branch::DefiniteDistinct)
    } else {
        let w = [
            C64::new(rng.random_range(-1.0..=1.0), 0.0),
            C64::new(rng.random_range(-1.0..=1.0), 0.0),
        ];
        let mut x = p.lift(w);
        linalg::normalize(&mut x);
        (x, Branch::DefiniteEqual)
    }
}

/// Next iterate from a definite projection, with `(mu, lambda)` fitted by
/// least squares.
pub fn update_definite(
    pair: &HermitianPair,
    p: &ProjectedPair,
    rng: &mut impl Rng,
) -> Result<(TwoDTriplet, Branch), Error> {
    let (x, branch) = definite_direction(p, rng);
    let (mu, lambda) = fit_mu_lambda(pair, &x)?;
    Ok((TwoDTriplet { mu, lambda, x }, branch))
}

/// Real `(mu, lambda)` minimizing `‖A x - mu C x - lambda x‖`.
pub fn fit_mu_lambda(pair: &HermitianPair, x: &[C64]) -> Result<(f64, f64), Error> {
    let ax = pair.apply(Which::A, x)?;
    let cx = pair.apply(Which::C, x)?;
    let stack = |v: &[C64]| -> Vec<f64> {
        v.iter()
            .map(|c| c.re)
            .chain(v.iter().map(|c| c.im))
            .collect()
    };
    let z = linalg::lstsq_2col(&stack(&cx), &stack(x), &stack(&ax));
    Ok((z[0], z[1]))
}

/// Starting vector for `(mu0, lambda0)`: the 2D Ritz vector, on the span of
/// the two eigenvectors of `A - mu0 C` with eigenvalues nearest `lambda0`,
/// whose Ritz value is nearest `(mu0, lambda0)`.
pub fn initial_vector(
    pair: &HermitianPair,
    mu0: f64,
    lambda0: f64,
    seed: u64,
) -> Result<Vec<C64>, Error> {
    let h = pair
        .shifted_dense(mu0)
        .ok_or(Error::Unsupported("dense initial vector"))?;
    let n = pair.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 2".into(),
        ));
    }
    let (vals, vecs) = linalg::hermitian_eig(h.as_ref())?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        (vals[i] - lambda0)
            .abs()
            .total_cmp(&(vals[j] - lambda0).abs())
    });
    let q1 = linalg::col_to_vec(vecs.as_ref(), idx[0]);
    let q2 = linalg::col_to_vec(vecs.as_ref(), idx[1]);
    let p = project(pair, &q1, &q2)?;
    if p.is_indefinite() {
        let c = nearest_candidate(&solve_2x2_2devp(&p)?, mu0, lambda0);
        Ok(p.lift(c.z))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(definite_direction(&p, &mut rng).0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterations,
    Stagnated,
    JacobianSingular,
    DegenerateBasis,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "maxit",
            Self::Stagnated => "stagnated",
            Self::JacobianSingular => "jacobian-singular",
            Self::DegenerateBasis => "degenerate-basis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMetric {
    Eta1,
    /// Structured estimate for block pairs; convergence also requires
    /// `|imag(x1^H x2)| <= tol`.
    Eta2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the metric drops to `tol`; `None` means `n · eps`.
    pub tol: Option<f64>,
    pub maxit: usize,
    pub metric: ErrorMetric,
    /// Stop when the metric fails to drop below the mean of the previous two.
    pub stagnation_check: bool,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: None,
            maxit: 20,
            metric: ErrorMetric::Eta1,
            stagnation_check: false,
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn tolerance(&self, n: usize) -> f64 {
        self.tol.unwrap_or(n as f64 * f64::EPSILON)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoDRqiResult {
    pub triplet: TwoDTriplet,
    pub status: Status,
    /// Number of updates performed.
    pub iterations: usize,
    pub report: BackwardErrorReport,
    pub history: ConvergenceHistory,
}

/// Runs the iteration from `init` (which is normalized first).
pub fn two_drqi(
    pair: &HermitianPair,
    init: TwoDTriplet,
    opts: &SolverOptions,
) -> Result<TwoDRqiResult, Error> {
    two_drqi_with_hook(pair, init, opts, |_| true)
}

/// As [`two_drqi`], calling `hook` on every new iterate before it is
/// measured. A hook returning `false` stops the run as stagnated.
pub fn two_drqi_with_hook<H>(
    pair: &HermitianPair,
    init: TwoDTriplet,
    opts: &SolverOptions,
    mut hook: H,
) -> Result<TwoDRqiResult, Error>
where
    H: FnMut(&mut TwoDTriplet) -> bool,
{
    let n = pair.dim();
    if init.x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: init.x.len(),
        });
    }
    if !pair.c_is_indefinite()? {
        return Err(Error::InvalidArgument("C must be indefinite".into()));
    }
    let tol = opts.tolerance(n);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut t = TwoDTriplet::new(init.mu, init.lambda, init.x)?;

    let measure = |t: &TwoDTriplet| -> Result<(f64, bool, BackwardErrorReport), Error> {
        match opts.metric {
            ErrorMetric::Eta1 => {
                let rep = eta1(pair, t)?;
                Ok((rep.eta1, rep.eta1 <= tol, rep))
            }
            ErrorMetric::Eta2 => {
                let rep = eta2_dti(pair, t)?;
                let e2 = rep.eta2.unwrap_or(f64::INFINITY);
                let m = n / 2;
                let im = dotc(&t.x[..m], &t.x[m..]).im.abs();
                Ok((e2, e2 <= tol && im <= tol, rep))
            }
        }
    };
    let record = |k: usize, t: &TwoDTriplet, eta: f64, rep: &BackwardErrorReport, elapsed: f64| {
        IterationRecord {
            k,
            mu: t.mu,
            lambda: t.lambda,
            eta,
            eta1: rep.eta1,
            c1: None,
            c2: None,
            abs_a12: None,
            branch: None,
            elapsed,
        }
    };

    let (eta, done, rep) = measure(&t)?;
    let mut history = ConvergenceHistory {
        records: vec![record(0, &t, eta, &rep, 0.0)],
    };
    let mut best = (eta, t.clone(), rep);
    let mut current_rep = rep;
    if done {
        return Ok(TwoDRqiResult {
            triplet: t,
            status: Status::Converged,
            iterations: 0,
            report: rep,
            history,
        });
    }

    let mut status = Status::MaxIterations;
    let mut k = 0;
    while k < opts.maxit {
        let proj = match solve_augmented(pair, &t) {
            Ok(xa) => match orthonormalize_and_align(pair, &xa) {
                Ok(p) => p,
                Err(Error::DegenerateBasis) => {
                    status = Status::DegenerateBasis;
                    break;
                }
                Err(e) => return Err(e),
            },
            Err(Error::JacobianSingular) => {
                status = Status::JacobianSingular;
                break;
            }
            Err(e) => return Err(e),
        };
        let (mut next, branch) = if proj.is_indefinite() {
            update_indefinite(&proj, t.mu, t.lambda)?
        } else {
            update_definite(pair, &proj, &mut rng)?
        };
        let row = history.records.last_mut().expect("nonempty history");
        row.c1 = Some(proj.c1);
        row.c2 = Some(proj.c2);
        row.abs_a12 = Some(proj.a12.norm());
        row.branch = Some(branch);

        if !hook(&mut next) {
            status = Status::Stagnated;
            break;
        }
        k += 1;
        let (eta, done, rep) = measure(&next)?;
        history
            .records
            .push(record(k, &next, eta, &rep, start.elapsed().as_secs_f64()));
        t = next;
        current_rep = rep;
        if eta < best.0 {
            best = (eta, t.clone(), rep);
        }
        if done {
            status = Status::Converged;
            break;
        }
        if opts.stagnation_check && k >= 2 {
            let r = &history.records;
            if eta >= 0.5 * (r[k - 2].eta + r[k - 1].eta) {
                status = Status::Stagnated;
                break;
            }
        }
    }
    let (triplet, report) = match status {
        Status::Converged => (t, current_rep),
        _ if best.0 < history.records.last().map_or(f64::INFINITY, |r| r.eta) => (best.1, best.2),
        _ => (t, current_rep),
    };
    Ok(TwoDRqiResult {
        triplet,
        status,
        iterations: k,
        report,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::build_example61;

    fn projected(a11: f64, a12: C64, a22: f64, c1: f64, c2: f64) -> ProjectedPair {
        ProjectedPair {
            v: Mat::from_fn(2, 2, |i, j| if i == j { ONE } else { ZERO }),
            a11,
            a12,
            a22,
            c1,
            c2,
        }
    }

    fn check_candidate(p: &ProjectedPair, c: &Candidate) {
        let z = c.z;
        let cz = [z[0] * p.c1, z[1] * p.c2];
        let az = [
            z[0] * p.a11 + p.a12 * z[1],
            p.a12.conj() * z[0] + z[1] * p.a22,
        ];
        for i in 0..2 {
            let r = az[i] - cz[i] * c.nu - z[i] * c.theta;
            assert!(r.norm() < 1e-13, "residual {r}");
        }
        let g = z[0].norm_sqr() * p.c1 + z[1].norm_sqr() * p.c2;
        assert!(g.abs() < 1e-15);
        assert!((z[0].norm_sqr() + z[1].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_candidates_solve_projected_problem() {
        let p = projected(0.3, C64::new(0.2, -0.7), -1.1, 2.0, -0.5);
        let cands = solve_2x2_2devp(&p).unwrap();
        assert_eq!(cands.len(), 2);
        for c in &cands {
            check_candidate(&p, c);
        }
    }

    #[test]
    fn two_by_two_multiple_case() {
        // A = diag(1, 2), C = diag(1, -1): nu = -0.5, theta = 1.5
        let p = projected(1.0, ZERO, 2.0, 1.0, -1.0);
        let cands = solve_2x2_2devp(&p).unwrap();
        assert_eq!(cands.len(), 1);
        assert!((cands[0].nu + 0.5).abs() < 1e-15 && (cands[0].theta - 1.5).abs() < 1e-15);
        check_candidate(&p, &cands[0]);
    }

    #[test]
    fn definite_projection_rejected() {
        let p = projected(1.0, ZERO, 2.0, 1.0, 0.5);
        assert!(solve_2x2_2devp(&p).is_err());
    }

    #[test]
    fn nearest_candidate_tie_goes_first() {
        let a = Candidate {
            nu: 1.0,
            theta: 0.0,
            z: [ONE, ZERO],
        };
        let b = Candidate {
            nu: -1.0,
            theta: 0.0,
            z: [ZERO, ONE],
        };
        assert_eq!(nearest_candidate(&[a, b], 0.0, 0.0), a);
        assert_eq!(nearest_candidate(&[a, b], -0.5, 0.0), b);
    }

    #[test]
    fn definite_direction_picks_smaller_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = projected(0.0, ZERO, 0.0, 3.0, 1.0);
        let (x, b) = definite_direction(&p, &mut rng);
        assert_eq!(b, Branch::DefiniteDistinct);
        assert_eq!(x, vec![ZERO, ONE]);
        let p = projected(0.0, ZERO, 0.0, -1.0, -3.0);
        assert_eq!(definite_direction(&p, &mut rng).0, vec![ONE, ZERO]);
        let p = projected(0.0, ZERO, 0.0, 2.0, 2.0);
        let (x, b) = definite_direction(&p, &mut rng);
        assert_eq!(b, Branch::DefiniteEqual);
        assert!((norm2(&x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_is_hermitian() {
        let pair = build_example61();
        let t = TwoDTriplet::new(
            0.3,
            -0.2,
            vec![C64::new(0.5, 0.1), C64::new(-0.2, 0.4), ONE],
        )
        .unwrap();
        let j = jacobian_dense(&pair, &t).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert!((j[(r, c)] - j[(c, r)].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn fit_recovers_exact_pair() {
        let pair = build_example61();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (mu, lambda) = fit_mu_lambda(&pair, &linalg::real_vec(&[0.0, s, s])).unwrap();
        assert!((mu - 1.0).abs() < 1e-12 && (lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn augmented_solution_satisfies_border() {
        let pair = build_example61();
        let t = TwoDTriplet::new(
            -0.1,
            -0.7,
            vec![C64::new(0.5, 0.1), C64::new(-0.2, 0.4), ONE],
        )
        .unwrap();
        let xa = solve_augmented(&pair, &t).unwrap();
        let cx = pair.apply(Which::C, &t.x).unwrap();
        let x0 = linalg::col_to_vec(xa.as_ref(), 0);
        let x1 = linalg::col_to_vec(xa.as_ref(), 1);
        assert!((dotc(&cx, &x0) + ONE).norm() < 1e-13);
        assert!(dotc(&t.x, &x0).norm() < 1e-13);
        assert!(dotc(&cx, &x1).norm() < 1e-13);
        assert!((dotc(&t.x, &x1) + ONE).norm() < 1e-13);
    }
}
