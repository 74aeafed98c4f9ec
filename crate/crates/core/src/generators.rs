//! Test problems: the 3×3 example pair, the Orr–Sommerfeld state matrix,
//! MIMO relay precoder pairs, and seeded random instances.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::banded::BandMatrix;
use crate::error::Error;
use crate::linalg;
use crate::ops::{Combination, HermitianOperator, HermitianPair, KroneckerRankOne, Structure};
use crate::state::{BandedPencil, StateMatrix};

/// Returns the matrices of the 3×3 example pair.
pub fn example61_matrices() -> (Mat<C64>, Mat<C64>) {
    let a = [[-0.7, 0.01, 0.2], [0.01, 2.0, 0.0], [0.2, 0.0, 0.0]];
    let c = [[0.3, 0.01, 0.2], [0.01, 1.0, 0.0], [0.2, 0.0, -1.0]];
    (
        Mat::from_fn(3, 3, |i, j| C64::new(a[i][j], 0.0)),
        Mat::from_fn(3, 3, |i, j| C64::new(c[i][j], 0.0)),
    )
}

/// Small indefinite pair with a 2D-eigenvalue `(1, 1)` of multiplicity two
/// in the parameter eigenvalue problem, plus two simple ones.
pub fn build_example61() -> HermitianPair {
    let (a, c) = example61_matrices();
    HermitianPair::dense(a, c).expect("example pair is Hermitian")
}

/// Finite-difference Orr–Sommerfeld operator `Â = L^{-1} B` on `n` interior
/// points of `[-1, 1]` with plane Poiseuille base flow.
///
/// Both factors are scaled by `h²`, which leaves `Â` unchanged and keeps the
/// banded entries `O(1)`. Products use the split
/// `Â = L / (R h²) - i U - i L^{-1} ([U, L] + 2 h² I)`, which is accurate to
/// `O(eps ‖Â‖)` for every `n`.
pub fn build_orr_sommerfeld(n: usize, reynolds: f64) -> Result<StateMatrix, Error> {
    let os = OsParts::new(n, reynolds)?;
    let u = &os.u;
    let d: Vec<C64> = u.iter().map(|&ui| C64::new(0.0, -ui)).collect();
    let mut s = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        s.add(i, i, C64::new(0.0, -2.0 * os.h2));
        if i + 1 < n {
            s.add(i, i + 1, C64::new(0.0, u[i + 1] - u[i]));
            s.add(i + 1, i, C64::new(0.0, u[i] - u[i + 1]));
        }
    }
    let alpha = 1.0 / (reynolds * os.h2);
    Ok(StateMatrix::pencil(BandedPencil::split(
        os.l_diag, os.l_off, alpha, d, s, 1,
    )?))
}

/// The same operator with products formed as `L^{-1} (B x)` from the
/// assembled `B = L² / (R h²) - i (U L + 2 h² I)`. Their rounding error is of
/// order `eps ‖B‖ ‖L^{-1}‖`, which grows like `n⁴`.
pub fn build_orr_sommerfeld_assembled(n: usize, reynolds: f64) -> Result<StateMatrix, Error> {
    let os = OsParts::new(n, reynolds)?;
    let h2 = os.h2;
    let l = |i: usize, j: usize| -> f64 {
        if i == j {
            os.l_diag[i]
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    };
    let mut b = BandMatrix::zeros(n, 2, 2);
    for i in 0..n {
        for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
            let mut l2 = 0.0;
            for t in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                l2 += l(i, t) * l(t, j);
            }
            let mut v = C64::new(l2 / (reynolds * h2), 0.0);
            v -= C64::new(0.0, os.u[i] * l(i, j));
            if i == j {
                v -= C64::new(0.0, 2.0 * h2);
            }
            if v != C64::new(0.0, 0.0) {
                b.add(i, j, v);
            }
        }
    }
    Ok(StateMatrix::pencil(BandedPencil::new(
        os.l_diag, os.l_off, b, 2,
    )?))
}

struct OsParts {
    h2: f64,
    l_diag: Vec<f64>,
    l_off: Vec<f64>,
    /// Base flow `1 - y²` at the grid points.
    u: Vec<f64>,
}

impl OsParts {
    fn new(n: usize, reynolds: f64) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "Orr-Sommerfeld needs n >= 2, got {n}"
            )));
        }
        if !(reynolds > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Reynolds number must be positive, got {reynolds}"
            )));
        }
        let h = 2.0 / (n as f64 + 1.0);
        let h2 = h * h;
        let u = (0..n)
            .map(|i| {
                let y = -1.0 + (i as f64 + 1.0) * h;
                1.0 - y * y
            })
            .collect();
        Ok(Self {
            h2,
            l_diag: vec![-(2.0 + h2); n],
            l_off: vec![1.0; n - 1],
            u,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MimoParams {
    pub gamma_th: f64,
    pub sigma_r2: f64,
    pub sigma_d2: f64,
}

impl Default for MimoParams {
    fn default() -> Self {
        Self {
            gamma_th: 10f64.powf(0.3),
            sigma_r2: 0.1,
            sigma_d2: 0.1,
        }
    }
}

/// The factor matrices `F1, F2` (already whitened by `F0^{-1/2}`).
pub fn mimo_factors(h_up: &Mat<C64>, params: MimoParams) -> Result<(Mat<C64>, Mat<C64>), Error> {
    let m = h_up.nrows();
    if m < 2 || h_up.ncols() != 2 {
        return Err(Error::InvalidArgument(format!(
            "uplink channel must be m x 2 with m >= 2, got {}x{}",
            m,
            h_up.ncols()
        )));
    }
    let MimoParams {
        gamma_th,
        sigma_r2,
        sigma_d2,
    } = params;
    if !(gamma_th > 0.0 && sigma_r2 > 0.0 && sigma_d2 > 0.0) {
        return Err(Error::InvalidArgument(
            "MIMO parameters must be positive".into(),
        ));
    }
    // conj(h) h^T
    let outer = |k: usize| Mat::<C64>::from_fn(m, m, |i, j| h_up[(i, k)].conj() * h_up[(j, k)]);
    let (p1, p2) = (outer(0), outer(1));
    let eye = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let f0 = Mat::<C64>::from_fn(m, m, |i, j| p1[(i, j)] + p2[(i, j)] + sigma_r2 * eye(i, j));
    let s = 1.0 / (gamma_th * sigma_d2);
    let f1 = Mat::<C64>::from_fn(m, m, |i, j| {
        (p2[(i, j)] * gamma_th + gamma_th * sigma_r2 * eye(i, j) - p1[(i, j)]) * s
    });
    let f2 = Mat::<C64>::from_fn(m, m, |i, j| {
        (p1[(i, j)] * gamma_th + gamma_th * sigma_r2 * eye(i, j) - p2[(i, j)]) * s
    });
    // F0^{-1/2} from its eigendecomposition
    let (vals, vecs) = linalg::hermitian_eig(f0.as_ref())?;
    let isq = Mat::<C64>::from_fn(m, m, |i, j| {
        (0..m)
            .map(|k| vecs[(i, k)] * vecs[(j, k)].conj() / vals[k].sqrt())
            .sum()
    });
    let whiten = |f: &Mat<C64>| {
        let t = &isq * f;
        let w = &t * &isq;
        // remove rounding asymmetry
        Mat::<C64>::from_fn(m, m, |i, j| 0.5 * (w[(i, j)] + w[(j, i)].conj()))
    };
    Ok((whiten(&f1), whiten(&f2)))
}

type OperatorRef = Arc<dyn HermitianOperator>;

/// Kronecker-structured operators `A = F1 ⊗ g1 g1^H` and `B = F2 ⊗ g2 g2^H`
/// of dimension `m²`.
pub fn build_mimo_pair(
    h_up: &Mat<C64>,
    h_dl: &Mat<C64>,
    params: MimoParams,
) -> Result<(OperatorRef, OperatorRef), Error> {
    let m = h_up.nrows();
    if h_dl.nrows() != m || h_dl.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: h_dl.nrows(),
        });
    }
    let (f1, f2) = mimo_factors(h_up, params)?;
    let g1 = linalg::col_to_vec(h_dl.as_ref(), 0);
    let g2 = linalg::col_to_vec(h_dl.as_ref(), 1);
    Ok((
        Arc::new(KroneckerRankOne::new(f1, g1)?),
        Arc::new(KroneckerRankOne::new(f2, g2)?),
    ))
}

/// Complex Gaussian `CN(0, 1)` channels for a seeded MIMO instance.
pub fn random_mimo_channels(m: usize, seed: u64) -> (Mat<C64>, Mat<C64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    let h_up = Mat::from_fn(m, 2, |_, _| draw());
    let h_dl = Mat::from_fn(m, 2, |_, _| draw());
    (h_up, h_dl)
}

/// `(A, B)` for a seeded MIMO instance, plus the pair `(A, A - B)`.
pub fn mimo_instance(m: usize, seed: u64) -> Result<MimoInstance, Error> {
    let (h_up, h_dl) = random_mimo_channels(m, seed);
    let (a, b) = build_mimo_pair(&h_up, &h_dl, MimoParams::default())?;
    Ok(MimoInstance { a, b })
}

#[derive(Debug, Clone)]
pub struct MimoInstance {
    pub a: Arc<dyn HermitianOperator>,
    pub b: Arc<dyn HermitianOperator>,
}

impl MimoInstance {
    /// The pair `(A, C)` with `C = A - B`.
    pub fn pair(&self) -> Result<HermitianPair, Error> {
        let c = Combination::new(vec![(1.0, self.a.clone()), (-1.0, self.b.clone())])?;
        HermitianPair::from_operators(self.a.clone(), Arc::new(c), Structure::KroneckerRankOne)
    }
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> Mat<C64> {
    let g = Mat::<C64>::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    Mat::from_fn(n, n, |i, j| 0.5 * (g[(i, j)] + g[(j, i)].conj()))
}

/// Random Hermitian matrix with eigenvalues of both signs.
pub fn random_indefinite(n: usize, rng: &mut impl Rng) -> Mat<C64> {
    loop {
        let m = random_hermitian(n, rng);
        let ev = linalg::hermitian_eigenvalues(m.as_ref()).expect("small eigenproblem");
        if ev[0] < 0.0 && ev[n - 1] > 0.0 {
            return m;
        }
    }
}

/// Random stable matrix: a Gaussian matrix shifted so its rightmost
/// eigenvalue sits at real part `-margin`.
pub fn random_stable(m: usize, margin: f64, rng: &mut impl Rng) -> Mat<C64> {
    let scale = 1.0 / (m as f64).sqrt();
    let mut a = Mat::<C64>::from_fn(m, m, |_, _| {
        C64::new(
            rng.sample::<f64, _>(StandardNormal) * scale,
            rng.sample::<f64, _>(StandardNormal) * scale,
        )
    });
    let ev = linalg::eigenvalues(a.as_ref()).expect("small eigenproblem");
    let right = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    for i in 0..m {
        a[(i, i)] -= C64::new(right + margin, 0.0);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::Which;

    #[test]
    fn example61_entries_and_eigentriplet() {
        let pair = build_example61();
        let (a, c) = pair.dense_mats().unwrap();
        assert_eq!(a[(0, 0)].re, -0.7);
        assert_eq!(c[(2, 2)].re, -1.0);
        assert!(pair.c_is_indefinite().unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = linalg::real_vec(&[0.0, s, s]);
        let y = pair.apply(Which::Shifted(1.0), &x).unwrap();
        for i in 0..3 {
            assert!((y[i] - x[i]).norm() < 1e-15);
        }
        assert_eq!(
            pair.apply(Which::Shifted(0.0), &x).unwrap(),
            pair.apply(Which::A, &x).unwrap()
        );
    }

    #[test]
    fn orr_sommerfeld_n3_factors() {
        // L̃ = h² L with h = 0.5: diagonal -2.25, off-diagonal 1, i.e. L = 4 tridiag(1, -2.25, 1)
        let StateMatrix::Pencil { p, .. } = build_orr_sommerfeld(3, 1000.0).unwrap() else {
            panic!()
        };
        let h2 = 0.25;
        assert_eq!(p.dim(), 3);
        let dense = build_orr_sommerfeld(3, 1000.0).unwrap().to_dense();
        // oracle: form L, U, B directly and compare L^{-1} B
        let l = Mat::<C64>::from_fn(3, 3, |i, j| {
            C64::new(
                if i == j {
                    -9.0
                } else if i.abs_diff(j) == 1 {
                    4.0
                } else {
                    0.0
                },
                0.0,
            )
        });
        let u = [0.75, 1.0, 0.75];
        let ll = &l * &l;
        let b = Mat::<C64>::from_fn(3, 3, |i, j| {
            ll[(i, j)] / 1000.0
                - C64::new(0.0, 1.0) * (l[(i, j)] * u[i] + if i == j { 2.0 } else { 0.0 })
        });
        let lu = l.partial_piv_lu();
        use faer::linalg::solvers::Solve;
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        for i in 0..3 {
            for j in 0..3 {
                assert!((x[(i, j)] - dense[(i, j)]).norm() < 1e-12 * (1.0 + x[(i, j)].norm()));
            }
        }
        let _ = h2;
    }

    #[test]
    fn orr_sommerfeld_split_matches_assembled() {
        let a = build_orr_sommerfeld(12, 500.0).unwrap();
        let full = build_orr_sommerfeld_assembled(12, 500.0)
            .unwrap()
            .to_dense();
        let d = a.to_dense();
        for i in 0..12 {
            for j in 0..12 {
                assert!((d[(i, j)] - full[(i, j)]).norm() < 1e-12 * (1.0 + full[(i, j)].norm()));
            }
        }
        let mut x: Vec<C64> = (0..12)
            .map(|i| C64::new((i as f64).sin(), (2.0 * i as f64).cos()))
            .collect();
        linalg::normalize(&mut x);
        let mut y = vec![C64::new(0.0, 0.0); 12];
        a.apply_adjoint(&x, &mut y);
        for j in 0..12 {
            let want: C64 = (0..12).map(|i| d[(i, j)].conj() * x[i]).sum();
            assert!((want - y[j]).norm() < 1e-10 * (1.0 + want.norm()));
        }
        // the banded B used by the shifted solves agrees with the split products
        let mu = 0.3;
        let shifted = Mat::from_fn(12, 12, |i, j| {
            d[(i, j)]
                - if i == j {
                    C64::new(0.0, mu)
                } else {
                    C64::new(0.0, 0.0)
                }
        });
        let (smin, _, _) = linalg::smallest_singular_triplet(shifted.as_ref()).unwrap();
        assert!((a.sigma_min(mu).unwrap() - smin).abs() < 1e-9 * smin.max(1.0));
    }

    #[test]
    fn orr_sommerfeld_rejects_small_n() {
        assert!(build_orr_sommerfeld(1, 1000.0).is_err());
    }

    #[test]
    fn mimo_shapes() {
        let inst = mimo_instance(10, 1).unwrap();
        assert_eq!(inst.a.dim(), 100);
        assert_eq!(inst.b.dim(), 100);
    }
}
