//! Solvers for the Hermitian 2D eigenvalue problem
//!
//! ```text
//! (A - mu C) x = lambda x,   x^H C x = 0,   ‖x‖ = 1
//! ```
//!
//! with `A`, `C` Hermitian and `C` indefinite, together with two
//! applications: min-max eigenvalue optimization over a real parameter and
//! the distance to instability of a stable matrix.

// Negated float comparisons reject NaN; index loops mirror banded kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod backward_error;
pub mod banded;
pub mod dti;
pub mod error;
pub mod generators;
pub mod history;
pub mod krylov;
pub mod linalg;
pub mod mtx;
pub mod ops;
pub mod oracles;
pub mod rqminmax;
pub mod state;
pub mod twodrqi;

pub use backward_error::{construct_perturbation, eta1, eta2_dti, BackwardErrorReport};
pub use error::{Error, Result};
pub use history::{Branch, ConvergenceHistory, IterationRecord};
pub use ops::{HermitianOperator, HermitianPair, Structure};
pub use state::StateMatrix;
pub use twodrqi::{two_drqi, ErrorMetric, SolverOptions, Status, TwoDRqiResult, TwoDTriplet};

pub use num_complex::Complex64 as C64;
