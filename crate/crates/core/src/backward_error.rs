//! Normwise backward error of an approximate 2D-eigentriplet.
//!
//! `eta1` is computable from one residual and brackets the true backward
//! error as `eta1 <= eta <= sqrt(2) eta1`. `construct_perturbation` builds
//! Hermitian perturbations attaining the upper end.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{self, dotc, norm2, ZERO};
use crate::ops::{HermitianPair, Which};
use crate::twodrqi::TwoDTriplet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardErrorReport {
    pub eta1: f64,
    /// `sqrt(2) eta1`, the certified upper bound on the backward error.
    pub eta_upper: f64,
    pub gamma_a: f64,
    pub gamma_c: f64,
    pub residual_norm: f64,
    /// Structured estimate for block pairs built from a state matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
}

struct Residual {
    ax: Vec<C64>,
    cx: Vec<C64>,
    r: Vec<C64>,
}

fn residual(pair: &HermitianPair, t: &TwoDTriplet) -> Result<Residual, Error> {
    let ax = pair.apply(Which::A, &t.x)?;
    let cx = pair.apply(Which::C, &t.x)?;
    let r = ax
        .iter()
        .zip(&cx)
        .zip(&t.x)
        .map(|((a, c), x)| a - c * t.mu - x * t.lambda)
        .collect();
    Ok(Residual { ax, cx, r })
}

/// `eta1 = max(|gamma_A|/‖A‖, |gamma_C|/‖C‖, ‖r‖/(‖A‖ + |mu|‖C‖))` with
/// `gamma_A = x^H A x - lambda`, `gamma_C = x^H C x` and
/// `r = (A - mu C - lambda I) x`.
pub fn eta1(pair: &HermitianPair, t: &TwoDTriplet) -> Result<BackwardErrorReport, Error> {
    let res = residual(pair, t)?;
    Ok(report_from(pair, t, &res))
}

fn report_from(pair: &HermitianPair, t: &TwoDTriplet, res: &Residual) -> BackwardErrorReport {
    let (na, nc) = (pair.a_norm(), pair.c_norm());
    let gamma_a = dotc(&t.x, &res.ax).re - t.lambda;
    let gamma_c = dotc(&t.x, &res.cx).re;
    let rn = norm2(&res.r);
    let eta1 = (gamma_a.abs() / na)
        .max(gamma_c.abs() / nc)
        .max(rn / (na + t.mu.abs() * nc));
    BackwardErrorReport {
        eta1,
        eta_upper: std::f64::consts::SQRT_2 * eta1,
        gamma_a,
        gamma_c,
        residual_norm: rn,
        eta2: None,
    }
}

/// Structured estimate `sqrt(2) ‖r‖ / ‖Â‖` for a block pair, where `‖Â‖` is
/// the norm cached as `‖A‖`.
pub fn eta2_dti(pair: &HermitianPair, t: &TwoDTriplet) -> Result<BackwardErrorReport, Error> {
    let res = residual(pair, t)?;
    let mut rep = report_from(pair, t, &res);
    rep.eta2 = Some(std::f64::consts::SQRT_2 * rep.residual_norm / pair.a_norm());
    Ok(rep)
}

/// `s (I - 2 v v^H)` with unit `v` (or `s I` when `v` is empty).
#[derive(Debug, Clone)]
pub struct ScaledReflector {
    pub scale: f64,
    pub v: Vec<C64>,
}

impl ScaledReflector {
    /// Hermitian `s H` with `s H x = y`, assuming unit `x` and `x^H y` real.
    /// The reflector maps `x` to `-sign(x^H y) y / ‖y‖` so that `x - H x`
    /// never cancels; the sign moves into `s`.
    fn mapping(x: &[C64], y: &[C64]) -> Self {
        let s = norm2(y);
        if s == 0.0 {
            return Self {
                scale: 0.0,
                v: Vec::new(),
            };
        }
        let flip = if dotc(x, y).re > 0.0 { -1.0 } else { 1.0 };
        let w: Vec<C64> = x.iter().zip(y).map(|(a, b)| a - b * (flip / s)).collect();
        let wn = norm2(&w);
        if wn <= 1e-300 {
            return Self {
                scale: flip * s,
                v: Vec::new(),
            };
        }
        Self {
            scale: flip * s,
            v: w.iter().map(|c| c / wn).collect(),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y: Vec<C64> = x.iter().map(|c| c * self.scale).collect();
        if !self.v.is_empty() {
            let h = dotc(&self.v, x) * (2.0 * self.scale);
            linalg::axpy(-h, &self.v, &mut y);
        }
        y
    }

    /// Spectral norm; reflections are unitary.
    pub fn norm(&self) -> f64 {
        self.scale.abs()
    }

    pub fn to_dense(&self, n: usize) -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| {
            let id = if i == j { self.scale } else { 0.0 };
            let refl = if self.v.is_empty() {
                ZERO
            } else {
                self.v[i] * self.v[j].conj() * (2.0 * self.scale)
            };
            C64::new(id, 0.0) - refl
        })
    }
}

/// Hermitian `(dA, dC)` making `t` an exact 2D-eigentriplet of
/// `(A + dA, C + dC)` with `max(‖dA‖/‖A‖, ‖dC‖/‖C‖) <= sqrt(2) eta1`.
pub fn construct_perturbation(
    pair: &HermitianPair,
    t: &TwoDTriplet,
) -> Result<(ScaledReflector, ScaledReflector), Error> {
    let res = residual(pair, t)?;
    let (na, nc) = (pair.a_norm(), pair.c_norm());
    let x = &t.x;
    let gamma_c = dotc(x, &res.cx).re;
    let gamma_a = dotc(x, &res.ax).re - t.lambda;
    // (I - x x^H) r
    let xr = dotc(x, &res.r);
    let mut rp = res.r.clone();
    linalg::axpy(-xr, x, &mut rp);
    let denom = na + t.mu.abs() * nc;
    let sign = if t.mu > 0.0 {
        1.0
    } else if t.mu < 0.0 {
        -1.0
    } else {
        0.0
    };
    let fa = -na / denom;
    let fc = if t.mu == 0.0 { 0.0 } else { sign * nc / denom };
    // with mu = 0 the A part absorbs the whole residual
    let fa = if t.mu == 0.0 { -1.0 } else { fa };
    let a: Vec<C64> = x
        .iter()
        .zip(&rp)
        .map(|(xi, ri)| xi * (-gamma_a) + ri * fa)
        .collect();
    let c: Vec<C64> = x
        .iter()
        .zip(&rp)
        .map(|(xi, ri)| xi * (-gamma_c) + ri * fc)
        .collect();
    Ok((
        ScaledReflector::mapping(x, &a),
        ScaledReflector::mapping(x, &c),
    ))
}

/// When `C + dC` is semidefinite (so `(C + dC) x = 0`), returns the rank-two
/// Hermitian `E = Δ (x q^H + q x^H)` with unit `q ⊥ x`. Adding `E` to `dC`
/// and `mu E` to `dA` leaves `A - mu C` and `x^H C x` unchanged and makes the
/// perturbed `C` indefinite. Returns `None` if `c_perturbed` is already
/// indefinite.
pub fn repair_indefiniteness(
    c_perturbed: &Mat<C64>,
    x: &[C64],
    delta: f64,
) -> Result<Option<Mat<C64>>, Error> {
    let n = x.len();
    let ev = linalg::hermitian_eigenvalues(c_perturbed.as_ref())?;
    let scale = ev
        .iter()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;
    if ev[0] < -tol && ev[n - 1] > tol {
        return Ok(None);
    }
    // q from the unit vector least aligned with x
    let k = (0..n)
        .min_by(|&i, &j| x[i].norm().total_cmp(&x[j].norm()))
        .ok_or_else(|| Error::InvalidArgument("empty vector".into()))?;
    let mut q = linalg::unit(n, k);
    for _ in 0..2 {
        let h = dotc(x, &q);
        linalg::axpy(-h, x, &mut q);
    }
    linalg::normalize(&mut q);
    Ok(Some(Mat::from_fn(n, n, |i, j| {
        (x[i] * q[j].conj() + q[i] * x[j].conj()) * delta
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::build_example61;

    fn residual_norm(
        pair: &HermitianPair,
        t: &TwoDTriplet,
        da: &Mat<C64>,
        dc: &Mat<C64>,
    ) -> (f64, f64) {
        let (a, c) = pair.dense_mats().unwrap();
        let n = pair.dim();
        let m = Mat::from_fn(n, n, |i, j| {
            a[(i, j)] + da[(i, j)] - (c[(i, j)] + dc[(i, j)]) * t.mu
        });
        let mut y = vec![ZERO; n];
        linalg::matvec(m.as_ref(), &t.x, &mut y);
        let r: Vec<C64> = y.iter().zip(&t.x).map(|(a, b)| a - b * t.lambda).collect();
        let cc = Mat::from_fn(n, n, |i, j| c[(i, j)] + dc[(i, j)]);
        let mut cx = vec![ZERO; n];
        linalg::matvec(cc.as_ref(), &t.x, &mut cx);
        (norm2(&r), dotc(&t.x, &cx).norm())
    }

    #[test]
    fn exact_triplet_has_zero_eta1() {
        let pair = build_example61();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let t = TwoDTriplet {
            mu: 1.0,
            lambda: 1.0,
            x: linalg::real_vec(&[0.0, s, s]),
        };
        let rep = eta1(&pair, &t).unwrap();
        assert!(rep.eta1 <= 4.0 * f64::EPSILON, "{}", rep.eta1);
    }

    #[test]
    fn perturbation_when_residual_is_along_x() {
        // x an exact eigenvector of A - mu C, so the A-part target is parallel to x
        let pair = build_example61();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for shift in [1e-13, -1e-13, 0.3, -0.3] {
            let t = TwoDTriplet {
                mu: 1.0,
                lambda: 1.0 + shift,
                x: linalg::real_vec(&[0.0, s, s]),
            };
            let (da, dc) = construct_perturbation(&pair, &t).unwrap();
            let (r, cq) = residual_norm(&pair, &t, &da.to_dense(3), &dc.to_dense(3));
            assert!(r <= 1e-15 && cq <= 1e-15, "{shift}: {r:e} {cq:e}");
            assert!((da.norm() - shift.abs()).abs() <= 1e-15);
        }
    }

    #[test]
    fn perturbation_with_zero_mu() {
        let pair = build_example61();
        let x = linalg::real_vec(&[0.6, 0.0, 0.8]);
        let t = TwoDTriplet {
            mu: 0.0,
            lambda: 0.3,
            x,
        };
        let (da, dc) = construct_perturbation(&pair, &t).unwrap();
        assert_eq!(dc.norm(), dc.scale.abs());
        let (r, g) = residual_norm(&pair, &t, &da.to_dense(3), &dc.to_dense(3));
        assert!(r < 1e-14 && g < 1e-14, "{r} {g}");
    }

    #[test]
    fn repair_makes_c_indefinite() {
        // C = diag(2, 1) with x = e1: the shift -x^H C x I gives diag(0, -1)
        let x = linalg::unit(2, 0);
        let shifted = Mat::from_fn(2, 2, |i, j| {
            C64::new(if i == j { [0.0, -1.0][i] } else { 0.0 }, 0.0)
        });
        let fix = repair_indefiniteness(&shifted, &x, 1e-12 * 2.0)
            .unwrap()
            .unwrap();
        let repaired = Mat::from_fn(2, 2, |i, j| shifted[(i, j)] + fix[(i, j)]);
        // a negative determinant means one eigenvalue of each sign
        let det = repaired[(0, 0)] * repaired[(1, 1)] - repaired[(0, 1)] * repaired[(1, 0)];
        assert!(det.re < 0.0 && det.im == 0.0);
        // x stays C-neutral and the residual on x is along q only
        let mut cx = vec![ZERO; 2];
        linalg::matvec(repaired.as_ref(), &x, &mut cx);
        assert!(dotc(&x, &cx).norm() < 1e-30);
        let indefinite = Mat::from_fn(2, 2, |i, j| {
            C64::new(if i == j { [1.0, -1.0][i] } else { 0.0 }, 0.0)
        });
        assert!(repair_indefiniteness(&indefinite, &x, 1e-12)
            .unwrap()
            .is_none());
    }
}
