//! Quadrotor rigid-body model, its hover linearization, and noisy
//! position/attitude measurement.
//!
//! State ordering: position (0–2), velocity (3–5), roll/pitch/yaw (6–8),
//! body rates (9–11). Inputs are the thrust deviation from hover and the
//! three body torques.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{rk4_step, Mat, NumError};

pub const STATE_DIM: usize = 12;
pub const INPUT_DIM: usize = 4;
pub const OUTPUT_DIM: usize = 6;

/// State indices selected by the measurement matrix.
pub const MEASURED_STATES: [usize; OUTPUT_DIM] = [0, 1, 2, 6, 7, 8];

/// Pitch magnitude at which the Euler-rate transformation is rejected.
pub const GIMBAL_MARGIN: f64 = 1e-6;

pub type VehicleState = [f64; STATE_DIM];
pub type ControlInput = [f64; INPUT_DIM];
pub type Measurement = [f64; OUTPUT_DIM];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("pitch {0} rad is at the Euler-angle singularity")]
    GimbalLock(f64),
    #[error("non-finite vehicle state")]
    NonFinite,
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

impl From<NumError> for PlantError {
    fn from(_: NumError) -> Self {
        PlantError::NonFinite
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadParams {
    pub mass: f64,
    pub gravity: f64,
    pub inertia: [f64; 3],
}

impl Default for QuadParams {
    fn default() -> Self {
        Self { mass: 1.0, gravity: 9.81, inertia: [0.01, 0.01, 0.02] }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let all = [self.mass, self.gravity, self.inertia[0], self.inertia[1], self.inertia[2]];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(PlantError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Continuous-time model matrices `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

/// Small-angle linearization about hover with zero yaw.
pub fn hover_linearization(params: &QuadParams) -> LinearModel {
    let g = params.gravity;
    let mut a = Mat::zeros(STATE_DIM, STATE_DIM);
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        a[(6 + i, 9 + i)] = 1.0;
    }
    a[(3, 7)] = g;
    a[(4, 6)] = -g;

    let mut b = Mat::zeros(STATE_DIM, INPUT_DIM);
    b[(5, 0)] = 1.0 / params.mass;
    for i in 0..3 {
        b[(9 + i, 1 + i)] = 1.0 / params.inertia[i];
    }

    let mut c = Mat::zeros(OUTPUT_DIM, STATE_DIM);
    for (row, &col) in MEASURED_STATES.iter().enumerate() {
        c[(row, col)] = 1.0;
    }
    LinearModel { a, b, c }
}

/// Rigid-body derivative with ZYX Euler angles. Total thrust is
/// `m·g + δT` along body z.
pub fn nonlinear_derivative(
    params: &QuadParams,
    x: &VehicleState,
    u: &ControlInput,
) -> Result<VehicleState, PlantError> {
    if x.iter().chain(u.iter()).any(|v| !v.is_finite()) {
        return Err(PlantError::NonFinite);
    }
    let theta = x[7];
    if theta.abs() >= std::f64::consts::FRAC_PI_2 - GIMBAL_MARGIN {
        return Err(PlantError::GimbalLock(theta));
    }
    Ok(derivative_unchecked(params, x, u))
}

#[inline]
fn derivative_unchecked(params: &QuadParams, x: &VehicleState, u: &ControlInput) -> VehicleState {
    let QuadParams { mass: m, gravity: g, inertia: j } = *params;
    let (phi, theta, psi) = (x[6], x[7], x[8]);
    let (p, q, r) = (x[9], x[10], x[11]);
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    let tt = st / ct;

    let thrust_per_mass = (m * g + u[0]) / m;
    let mut d = [0.0; STATE_DIM];
    d[0] = x[3];
    d[1] = x[4];
    d[2] = x[5];
    // Third column of R_z(ψ) R_y(θ) R_x(φ).
    d[3] = (cp * st * cf + sp * sf) * thrust_per_mass;
    d[4] = (sp * st * cf - cp * sf) * thrust_per_mass;
    d[5] = ct * cf * thrust_per_mass - g;
    d[6] = p + sf * tt * q + cf * tt * r;
    d[7] = cf * q - sf * r;
    d[8] = (sf * q + cf * r) / ct;
    // J ω̇ = τ − ω × (J ω)
    let (jp, jq, jr) = (j[0] * p, j[1] * q, j[2] * r);
    d[9] = (u[1] - (q * jr - r * jq)) / j[0];
    d[10] = (u[2] - (r * jp - p * jr)) / j[1];
    d[11] = (u[3] - (p * jq - q * jp)) / j[2];
    d
}

/// One RK4 step of the nonlinear model with zero-order-hold input.
pub fn step_nonlinear(
    params: &QuadParams,
    x: &VehicleState,
    u: &ControlInput,
    dt: f64,
) -> Result<VehicleState, PlantError> {
    nonlinear_derivative(params, x, u)?;
    let next = rk4_step(|s, inp| derivative_unchecked(params, s, inp), x, u, dt)?;
    Ok(next)
}

/// Per-channel measurement noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoise {
    pub std: [f64; OUTPUT_DIM],
}

impl MeasurementNoise {
    pub const ZERO: Self = Self { std: [0.0; OUTPUT_DIM] };

    pub fn new(position_std: f64, angle_std: f64) -> Self {
        Self { std: [position_std, position_std, position_std, angle_std, angle_std, angle_std] }
    }
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self::new(0.005, 0.002)
    }
}

/// `y = Cx + w` with independent zero-mean Gaussian `w`.
///
/// No random numbers are drawn for channels whose standard deviation is zero.
pub fn measure<R: Rng + ?Sized>(c: &Mat, x: &VehicleState, noise: &MeasurementNoise, rng: &mut R) -> Measurement {
    let mut y = [0.0; OUTPUT_DIM];
    c.mul_vec_into(x, &mut y);
    for (yi, &s) in y.iter_mut().zip(&noise.std) {
        if s > 0.0 {
            let w: f64 = rng.sample(StandardNormal);
            *yi += s * w;
        }
    }
    y
}
