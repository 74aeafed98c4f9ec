//! Brute-force baselines: eigencurve scanning for all 2D-eigenvalues of a
//! small pair, the dichotomous method for `max_mu lambda_min(A - mu C)`,
//! and a `sigma_min` scan for the distance to instability.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{self, dotc};
use crate::ops::{HermitianPair, Which};
use crate::rqminmax::MinmaxProblem;
use crate::state::StateMatrix;
use crate::twodrqi::{nearest_candidate, project, solve_2x2_2devp, TwoDTriplet};

/// Eigenvalues of `A - mu C` at one grid point, sorted descending, with
/// `x_i^H C x_i` for the matching eigenvectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigencurveSample {
    pub mu: f64,
    pub lambdas: Vec<f64>,
    pub c_values: Vec<f64>,
}

struct Curves {
    lambdas: Vec<f64>,
    vectors: faer::Mat<num_complex::Complex64>,
    c_values: Vec<f64>,
}

fn curves_at(pair: &HermitianPair, mu: f64) -> Result<Curves, Error> {
    let h = pair
        .shifted_dense(mu)
        .ok_or(Error::Unsupported("eigencurves need a dense pair"))?;
    let (mut vals, vecs) = linalg::hermitian_eig(h.as_ref())?;
    let n = vals.len();
    vals.reverse();
    let vectors = faer::Mat::from_fn(n, n, |i, j| vecs[(i, n - 1 - j)]);
    let (_, c) = pair.dense_mats().expect("dense checked above");
    let c_values = (0..n)
        .map(|j| {
            let x = linalg::col_to_vec(vectors.as_ref(), j);
            let mut cx = vec![linalg::ZERO; n];
            linalg::matvec(c.as_ref(), &x, &mut cx);
            dotc(&x, &cx).re
        })
        .collect();
    Ok(Curves {
        lambdas: vals,
        vectors,
        c_values,
    })
}

fn grid(range: (f64, f64), points: usize) -> Vec<f64> {
    let (lo, hi) = range;
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

/// Samples the sorted eigencurves on a uniform grid.
pub fn eigencurve_samples(
    pair: &HermitianPair,
    range: (f64, f64),
    points: usize,
) -> Result<Vec<EigencurveSample>, Error> {
    if points < 2 {
        return Err(Error::InvalidArgument(
            "need at least two grid points".into(),
        ));
    }
    grid(range, points)
        .into_iter()
        .map(|mu| {
            let c = curves_at(pair, mu)?;
            Ok(EigencurveSample {
                mu,
                lambdas: c.lambdas,
                c_values: c.c_values,
            })
        })
        .collect()
}

/// All 2D-eigentriplets found as sign changes of `x_i(mu)^H C x_i(mu)` along
/// the sorted eigencurves on `range`, refined by bisection until
/// `|x^H C x| <= refine_tol ‖C‖`.
///
/// A sign change can also come from a kink where two curves cross with
/// slopes of opposite sign. There the bisection closes on the crossing and
/// the triplet is taken from the 2×2 problem projected on the two crossing
/// eigenvectors. Triplets found on both curves are reported once.
pub fn eigencurve_scan(
    pair: &HermitianPair,
    range: (f64, f64),
    grid_points: usize,
    refine_tol: f64,
) -> Result<Vec<TwoDTriplet>, Error> {
    if grid_points < 10 {
        return Err(Error::InvalidArgument(
            "need at least 10 grid points".into(),
        ));
    }
    let tol = refine_tol * pair.c_norm();
    let mus = grid(range, grid_points);
    let mut found: Vec<TwoDTriplet> = Vec::new();
    let mut prev = curves_at(pair, mus[0])?;
    for w in mus.windows(2) {
        let next = curves_at(pair, w[1])?;
        for i in 0..prev.lambdas.len() {
            let (fa, fb) = (prev.c_values[i], next.c_values[i]);
            let hit = if fa.abs() <= tol {
                Some(at_grid(&prev, w[0], i))
            } else if fa.signum() != fb.signum() && fb.abs() > tol {
                Some(bisect_curve(pair, w[0], w[1], fa, i, tol)?)
            } else {
                None
            };
            if let Some(t) = hit {
                if !found
                    .iter()
                    .any(|f| (f.mu - t.mu).abs() < 1e-8 && (f.lambda - t.lambda).abs() < 1e-8)
                {
                    found.push(t);
                }
            }
        }
        prev = next;
    }
    if let Some(i) = (0..prev.lambdas.len()).find(|&i| prev.c_values[i].abs() <= tol) {
        let t = at_grid(&prev, *mus.last().expect("nonempty grid"), i);
        if !found
            .iter()
            .any(|f| (f.mu - t.mu).abs() < 1e-8 && (f.lambda - t.lambda).abs() < 1e-8)
        {
            found.push(t);
        }
    }
    found.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.lambda.total_cmp(&b.lambda)));
    Ok(found)
}

fn at_grid(c: &Curves, mu: f64, i: usize) -> TwoDTriplet {
    TwoDTriplet {
        mu,
        lambda: c.lambdas[i],
        x: linalg::col_to_vec(c.vectors.as_ref(), i),
    }
}

fn bisect_curve(
    pair: &HermitianPair,
    mut lo: f64,
    mut hi: f64,
    f_lo: f64,
    i: usize,
    tol: f64,
) -> Result<TwoDTriplet, Error> {
    let mut mid_curves = curves_at(pair, 0.5 * (lo + hi))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        mid_curves = curves_at(pair, mid)?;
        let f = mid_curves.c_values[i];
        if f.abs() <= tol {
            return Ok(at_grid(&mid_curves, mid, i));
        }
        if f.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
    }
    // jump in x^H C x: resolve the crossing on the nearest neighbouring curve
    let mu = 0.5 * (lo + hi);
    let n = mid_curves.lambdas.len();
    let l = &mid_curves.lambdas;
    let j = [i.wrapping_sub(1), i + 1]
        .into_iter()
        .filter(|&j| j < n)
        .min_by(|&a, &b| (l[a] - l[i]).abs().total_cmp(&(l[b] - l[i]).abs()))
        .ok_or(Error::Unsupported("crossing needs at least two curves"))?;
    let q1 = linalg::col_to_vec(mid_curves.vectors.as_ref(), i);
    let q2 = linalg::col_to_vec(mid_curves.vectors.as_ref(), j);
    let p = project(pair, &q1, &q2)?;
    if !p.is_indefinite() {
        return Ok(at_grid(&mid_curves, mu, i));
    }
    let c = nearest_candidate(&solve_2x2_2devp(&p)?, mu, l[i]);
    let x: Vec<_> = (0..pair.dim())
        .map(|r| p.v[(r, 0)] * c.z[0] + p.v[(r, 1)] * c.z[1])
        .collect();
    TwoDTriplet::new(c.nu, c.theta, x)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomousResult {
    pub mu: f64,
    pub value: f64,
    pub iterations: usize,
    /// Bracket after each iteration.
    pub brackets: Vec<(f64, f64)>,
}

/// The dichotomous method for the concave `g(mu) = lambda_min(A - mu C)`:
/// compare `g` at `(a+b)/2 ± eps_r` and drop the side that cannot hold the
/// maximum, until `b - a < tol_width`. `eps_r` defaults to `tol_width / 4`.
pub fn dichotomous_evopt(
    p: &MinmaxProblem,
    interval: (f64, f64),
    tol_width: f64,
    eps_r: Option<f64>,
) -> Result<DichotomousResult, Error> {
    dichotomous_by(|mu| p.lambda_min(mu), interval, tol_width, eps_r)
}

/// As [`dichotomous_evopt`] for any concave function.
pub fn dichotomous_by<G>(
    mut g: G,
    interval: (f64, f64),
    tol_width: f64,
    eps_r: Option<f64>,
) -> Result<DichotomousResult, Error>
where
    G: FnMut(f64) -> Result<f64, Error>,
{
    let (mut a, mut b) = interval;
    if !(b > a) || !(tol_width > 0.0) {
        return Err(Error::InvalidArgument(
            "need a < b and tol_width > 0".into(),
        ));
    }
    let eps = eps_r.unwrap_or(0.25 * tol_width);
    if !(eps > 0.0 && 2.0 * eps < tol_width) {
        return Err(Error::InvalidArgument(
            "eps_r must lie in (0, tol_width / 2)".into(),
        ));
    }
    let mut brackets = Vec::new();
    while b - a >= tol_width {
        let mid = 0.5 * (a + b);
        let (gl, gr) = (g(mid - eps)?, g(mid + eps)?);
        if gl < gr {
            a = mid - eps;
        } else {
            b = mid + eps;
        }
        brackets.push((a, b));
    }
    let mu = 0.5 * (a + b);
    Ok(DichotomousResult {
        mu,
        value: g(mu)?,
        iterations: brackets.len(),
        brackets,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaMinScan {
    pub beta: f64,
    pub mu: f64,
    /// Smallest sampled value before refinement.
    pub grid_min: f64,
    pub evaluations: usize,
}

/// `min_mu sigma_min(Â - mu j I)` over `range`: a uniform grid plus the
/// imaginary parts of the rightmost eigenvalues, then golden-section
/// refinement around the best sample to `1e-10` in `mu`.
///
/// The eigenvalue samples catch dips narrower than the grid spacing.
pub fn sigma_min_scan_dti(
    ahat: &StateMatrix,
    range: (f64, f64),
    grid_points: usize,
) -> Result<SigmaMinScan, Error> {
    if grid_points < 2 || !(range.1 > range.0) {
        return Err(Error::InvalidArgument(
            "need a nonempty range and at least two grid points".into(),
        ));
    }
    let mut mus = grid(range, grid_points);
    let mut ev = ahat.eigenvalues()?;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    mus.extend(
        ev.iter()
            .take(20)
            .map(|z| z.im)
            .filter(|m| (range.0..=range.1).contains(m)),
    );
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    let samples: Vec<f64> = mus
        .iter()
        .map(|&m| ahat.sigma_min(m))
        .collect::<Result<_, _>>()?;
    let mut evaluations = samples.len();
    let k = (0..samples.len())
        .min_by(|&i, &j| samples[i].total_cmp(&samples[j]))
        .expect("nonempty grid");
    let grid_min = samples[k];
    let mut lo = mus[k.saturating_sub(1)];
    let mut hi = mus[(k + 1).min(mus.len() - 1)];
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let mut f1 = ahat.sigma_min(x1)?;
    let mut f2 = ahat.sigma_min(x2)?;
    evaluations += 2;
    while hi - lo > 1e-10 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = ahat.sigma_min(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = ahat.sigma_min(x2)?;
        }
        evaluations += 1;
    }
    let (mut beta, mut mu) = if f1 < f2 { (f1, x1) } else { (f2, x2) };
    if grid_min < beta {
        beta = grid_min;
        mu = mus[k];
    }
    Ok(SigmaMinScan {
        beta,
        mu,
        grid_min,
        evaluations,
    })
}

/// Largest `|x^H C x|` over a set of triplets; used to confirm scan output.
pub fn max_c_residual(pair: &HermitianPair, ts: &[TwoDTriplet]) -> Result<f64, Error> {
    ts.iter().try_fold(0.0f64, |m, t| {
        Ok(m.max(dotc(&t.x, &pair.apply(Which::C, &t.x)?).norm()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::build_example61;
    use crate::rqminmax::dense_problem;
    use faer::Mat;
    use num_complex::Complex64 as C64;

    #[test]
    fn example61_scan_finds_three() {
        let pair = build_example61();
        let ts = eigencurve_scan(&pair, (-1.5, 1.5), 300, 1e-12).unwrap();
        let want = [
            (-0.665101440190437, -0.239801782612878),
            (-0.145810069397438, -0.744080780565709),
            (1.0, 1.0),
        ];
        for (m, l) in want {
            assert!(
                ts.iter()
                    .any(|t| (t.mu - m).abs() < 1e-9 && (t.lambda - l).abs() < 1e-9),
                "{m} {l}: {ts:?}"
            );
        }
        assert_eq!(ts.len(), 3);
    }

    #[test]
    fn definite_c_has_no_triplets() {
        let a = Mat::from_fn(3, 3, |i, j| C64::new((i + j) as f64, 0.0));
        let c = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(1.0 + i as f64, 0.0)
            } else {
                linalg::ZERO
            }
        });
        let pair = HermitianPair::dense(a, c).unwrap();
        assert!(eigencurve_scan(&pair, (-2.0, 2.0), 50, 1e-12)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn dichotomous_iteration_counts() {
        let tent = |mu: f64| Ok((1.0 - 2.0 * mu).min(2.0 * mu - 1.0));
        let r = dichotomous_by(tent, (0.0, 1.0), 1e-4, None).unwrap();
        assert_eq!(r.iterations, 15);
        assert!((r.mu - 0.5).abs() <= 0.5e-4 + 0.25e-4);
        assert_eq!(
            dichotomous_by(tent, (0.0, 1.0), 1e-8, None)
                .unwrap()
                .iterations,
            28
        );
    }

    #[test]
    fn dichotomous_on_symmetric_pair() {
        let d = |v: [f64; 2]| {
            Mat::from_fn(2, 2, |i, j| {
                if i == j {
                    C64::new(v[i], 0.0)
                } else {
                    linalg::ZERO
                }
            })
        };
        let p = dense_problem(d([1.0, -1.0]), d([-1.0, 1.0])).unwrap();
        let r = dichotomous_evopt(&p, (0.0, 1.0), 1e-8, None).unwrap();
        assert!((r.mu - 0.5).abs() <= 1e-8);
    }

    #[test]
    fn scalar_sigma_scan() {
        let a = StateMatrix::dense(Mat::from_fn(1, 1, |_, _| C64::new(-1.0, 0.0))).unwrap();
        let s = sigma_min_scan_dti(&a, (-2.0, 2.0), 41).unwrap();
        // sigma - 1 = mu^2 / 2 drops below eps for |mu| < 1.5e-8
        assert!((s.beta - 1.0).abs() < 1e-14 && s.mu.abs() < 1e-7, "{s:?}");
        assert!(s.grid_min + 1e-12 >= s.beta);
    }
}
