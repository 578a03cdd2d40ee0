//! Dense linear algebra and ODE kernels sized for the 12-state vehicle model.
//!
//! Everything here is a pure function over value types. Stability is never
//! checked with an eigensolver: a matrix is certified Hurwitz by solving its
//! Lyapunov equation and factoring the result.

mod linalg;
mod lyapunov;
mod mat;
mod riccati;
mod rk4;

pub use linalg::{cholesky, lu_solve, p_norm_sq, SymPosDef};
pub use lyapunov::{hurwitz_certificate, lyapunov_residual, solve_lyapunov};
pub use mat::Mat;
pub use riccati::{riccati_residual, solve_riccati_ode, RiccatiOptions, RiccatiSolution};
pub use rk4::rk4_step;

use thiserror::Error;

/// Pivot magnitude below which a system is treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-13;
/// Relative asymmetry accepted by [`SymPosDef::new`].
pub const SPD_SYMMETRY_TOL: f64 = 1e-12;
/// Relative asymmetry beyond which [`cholesky`] refuses its input.
pub const CHOLESKY_SYMMETRY_TOL: f64 = 1e-9;
/// Lyapunov residual bound, relative to `‖Q‖_F`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-8;
/// Riccati residual bound, relative to `‖Q‖_F`.
pub const RICCATI_RESIDUAL_TOL: f64 = 1e-6;
/// Internal RK4 step used when integrating the Riccati ODE.
pub const RICCATI_STEP: f64 = 1e-3;
/// Steady-state test: `‖Ṗ‖_F < RICCATI_STEADY_TOL · (1 + ‖P‖_F)`.
pub const RICCATI_STEADY_TOL: f64 = 1e-9;
/// Default iteration cap for the Riccati integration.
pub const RICCATI_MAX_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("singular matrix (pivot magnitude below {SINGULAR_PIVOT:e})")]
    SingularMatrix,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("Riccati integration did not converge within {0} steps")]
    NoConvergence(u64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
