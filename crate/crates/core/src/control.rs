//! Gain synthesis, the Lyapunov safety metric, the feedback law and the
//! Luenberger observer.
//!
//! The observer is implemented in the corrected form
//! `ẋ̂ = Ax̂ + Bu + L(y − Cx̂)`, whose estimation error obeys
//! `ė = (A − LC)e`. The sign `+L(Cx̂ − y)` that is sometimes written for
//! this observer would instead give `ė = (A + LC)e`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{
    hurwitz_certificate, lu_solve, p_norm_sq, rk4_step, solve_lyapunov, solve_riccati_ode, Mat, NumError,
    RiccatiOptions, SymPosDef,
};
use crate::plant::{
    ControlInput, LinearModel, Measurement, VehicleState, INPUT_DIM, MEASURED_STATES, OUTPUT_DIM, STATE_DIM,
};

pub type ObserverEstimate = VehicleState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error("closed loop {0} failed its Hurwitz certificate")]
    NotHurwitz(&'static str),
    #[error("invalid safety metric: {0}")]
    InvalidMetric(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Diagonal LQR weights for the controller and its dual observer problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignWeights {
    /// State cost on positions.
    pub lqr_q_pos: f64,
    /// State cost on every non-position state.
    pub lqr_q_other: f64,
    /// Input cost (same on all four inputs).
    pub lqr_r: f64,
    /// Observer "process" weight on the measured states.
    pub obs_q: f64,
    /// Observer weight on the unmeasured states (velocities and body rates).
    pub obs_q_unmeasured: f64,
    /// Observer "measurement" weight.
    pub obs_r: f64,
}

impl Default for DesignWeights {
    fn default() -> Self {
        Self { lqr_q_pos: 10.0, lqr_q_other: 1.0, lqr_r: 1.0, obs_q: 1.0, obs_q_unmeasured: 10.0, obs_r: 0.01 }
    }
}

impl DesignWeights {
    fn controller_costs(&self) -> Result<(SymPosDef, SymPosDef), ControlError> {
        let mut q = [self.lqr_q_other; STATE_DIM];
        q[..3].fill(self.lqr_q_pos);
        Ok((diag_weight(&q, "lqr_q")?, diag_weight(&[self.lqr_r; INPUT_DIM], "lqr_r")?))
    }

    fn observer_costs(&self) -> Result<(SymPosDef, SymPosDef), ControlError> {
        let mut q = [self.obs_q_unmeasured; STATE_DIM];
        for &i in &MEASURED_STATES {
            q[i] = self.obs_q;
        }
        Ok((diag_weight(&q, "obs_q")?, diag_weight(&[self.obs_r; OUTPUT_DIM], "obs_r")?))
    }
}

fn diag_weight(values: &[f64], name: &str) -> Result<SymPosDef, ControlError> {
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(ControlError::InvalidWeights(format!("{name} must be positive")));
    }
    Ok(SymPosDef::diag(values)?)
}

/// State-feedback and observer gains, both certified at construction.
#[derive(Debug, Clone)]
pub struct GainSet {
    k: Mat,
    l: Mat,
}

impl GainSet {
    pub fn new(model: &LinearModel, k: Mat, l: Mat) -> Result<Self, ControlError> {
        if !hurwitz_certificate(&model.a.sub(&model.b.matmul(&k))) {
            return Err(ControlError::NotHurwitz("A - BK"));
        }
        if !hurwitz_certificate(&model.a.sub(&l.matmul(&model.c))) {
            return Err(ControlError::NotHurwitz("A - LC"));
        }
        Ok(Self { k, l })
    }

    pub fn k(&self) -> &Mat {
        &self.k
    }

    pub fn l(&self) -> &Mat {
        &self.l
    }
}

/// Controller gain from the LQR problem and observer gain from its dual.
pub fn design_gains(model: &LinearModel, weights: &DesignWeights) -> Result<GainSet, ControlError> {
    let (qk, rk) = weights.controller_costs()?;
    let (ql, rl) = weights.observer_costs()?;
    let ctrl = solve_riccati_ode(&model.a, &model.b, &qk, &rk, RiccatiOptions::default())?;
    let dual = solve_riccati_ode(&model.a.transpose(), &model.c.transpose(), &ql, &rl, RiccatiOptions::default())?;
    GainSet::new(model, ctrl.gain, dual.gain.transpose())
}

/// The Lyapunov metric `P` and the ellipsoid sizes used by the mode machine
/// and the governors. All thresholds are read from here.
#[derive(Debug, Clone)]
pub struct SafetyMetric {
    p: SymPosDef,
    rho_s: f64,
    rho_m: f64,
    d_safe: f64,
    kappa: f64,
}

impl SafetyMetric {
    pub fn p(&self) -> &SymPosDef {
        &self.p
    }

    pub fn rho_s(&self) -> f64 {
        self.rho_s
    }

    pub fn rho_m(&self) -> f64 {
        self.rho_m
    }

    pub fn d_safe(&self) -> f64 {
        self.d_safe
    }

    /// Factor applied to the raw Lyapunov solution.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn norm_sq(&self, v: &[f64], c: &[f64]) -> f64 {
        p_norm_sq(&self.p, v, c)
    }

    /// Largest extent of `E(1, ·)` along a position axis, `max √((P⁻¹)_ii)`.
    pub fn max_position_semi_axis(&self) -> Result<f64, ControlError> {
        let inv = self.p.inverse()?;
        Ok((0..self.p.dim().min(3)).map(|i| inv[(i, i)].sqrt()).fold(0.0, f64::max))
    }
}

/// `P = κ·P_raw` where `P_raw` solves the closed-loop Lyapunov equation with
/// `Q = I` and `κ` makes the largest position semi-axis of `E(1, ·)` equal
/// to `d_safe`.
pub fn build_safety_metric(a_cl: &Mat, rho_s: f64, rho_m: f64, d_safe: f64) -> Result<SafetyMetric, ControlError> {
    if !(0.0 < rho_s && rho_s < rho_m && rho_m < 1.0) {
        return Err(ControlError::InvalidMetric(format!(
            "need 0 < rho_s < rho_m < 1, got rho_s={rho_s}, rho_m={rho_m}"
        )));
    }
    if !(d_safe.is_finite() && d_safe > 0.0) {
        return Err(ControlError::InvalidMetric(format!("d_safe must be positive, got {d_safe}")));
    }
    let p_raw = solve_lyapunov(a_cl, &SymPosDef::identity(a_cl.rows()))?;
    let inv = lu_solve(p_raw.mat(), &Mat::identity(a_cl.rows()))?;
    let n_pos = a_cl.rows().min(3);
    let max_diag = (0..n_pos).map(|i| inv[(i, i)]).fold(f64::MIN, f64::max);
    let kappa = max_diag / (d_safe * d_safe);
    let p = p_raw.scaled(kappa)?;
    Ok(SafetyMetric { p, rho_s, rho_m, d_safe, kappa })
}

/// `u = −K(x̂ − x_sp)`.
#[inline]
pub fn control_input(k: &Mat, x_hat: &ObserverEstimate, x_sp: &VehicleState) -> ControlInput {
    let mut err = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        err[i] = x_hat[i] - x_sp[i];
    }
    let mut u = [0.0; INPUT_DIM];
    k.mul_vec_into(&err, &mut u);
    for v in &mut u {
        *v = -*v;
    }
    u
}

/// Matrices the observer integrates, bundled so the hot loop does not
/// re-borrow them piecemeal.
#[derive(Debug, Clone)]
pub struct ObserverModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub l: Mat,
}

impl ObserverModel {
    pub fn new(model: &LinearModel, gains: &GainSet) -> Self {
        Self { a: model.a.clone(), b: model.b.clone(), c: model.c.clone(), l: gains.l().clone() }
    }

    #[inline]
    fn derivative(&self, x_hat: &ObserverEstimate, u: &ControlInput, y: &Measurement) -> ObserverEstimate {
        let mut ax = [0.0; STATE_DIM];
        let mut bu = [0.0; STATE_DIM];
        let mut cx = [0.0; OUTPUT_DIM];
        self.a.mul_vec_into(x_hat, &mut ax);
        self.b.mul_vec_into(u, &mut bu);
        self.c.mul_vec_into(x_hat, &mut cx);
        let mut innov = [0.0; OUTPUT_DIM];
        for i in 0..OUTPUT_DIM {
            innov[i] = y[i] - cx[i];
        }
        let mut li = [0.0; STATE_DIM];
        self.l.mul_vec_into(&innov, &mut li);
        let mut d = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            d[i] = ax[i] + bu[i] + li[i];
        }
        d
    }
}

/// One RK4 step of `ẋ̂ = Ax̂ + Bu + L(y − Cx̂)` with `u` and `y` held.
pub fn observer_step(
    obs: &ObserverModel,
    x_hat: &ObserverEstimate,
    u: &ControlInput,
    y: &Measurement,
    dt: f64,
) -> Result<ObserverEstimate, NumError> {
    rk4_step(|s, inp| obs.derivative(s, inp, y), x_hat, u, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{hover_linearization, QuadParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> Mat {
        Mat::from_rows(&[[v]])
    }

    #[test]
    fn default_design_is_certified() {
        let model = hover_linearization(&QuadParams::default());
        let gains = design_gains(&model, &DesignWeights::default()).unwrap();
        assert!(hurwitz_certificate(&model.a.sub(&model.b.matmul(gains.k()))));
        assert!(hurwitz_certificate(&model.a.sub(&gains.l().matmul(&model.c))));
    }

    #[test]
    fn scalar_duality() {
        let model = LinearModel { a: scalar(0.0), b: scalar(1.0), c: scalar(1.0) };
        let one = SymPosDef::identity(1);
        let k = solve_riccati_ode(&model.a, &model.b, &one, &one, RiccatiOptions::default()).unwrap();
        let l = solve_riccati_ode(&model.a, &model.c, &one, &one, RiccatiOptions::default()).unwrap();
        assert!((k.gain[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((l.gain[(0, 0)] - 1.0).abs() < 1e-8);
        assert!(GainSet::new(&model, k.gain, l.gain.transpose()).is_ok());
    }

    #[test]
    fn gainset_rejects_destabilizing_gain() {
        let model = LinearModel { a: scalar(0.0), b: scalar(1.0), c: scalar(1.0) };
        assert!(matches!(GainSet::new(&model, scalar(-1.0), scalar(1.0)), Err(ControlError::NotHurwitz("A - BK"))));
    }

    #[test]
    fn heavier_input_cost_stays_certified() {
        let model = hover_linearization(&QuadParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut w = DesignWeights::default();
            w.lqr_q_pos *= rng.gen_range(0.5..2.0);
            w.lqr_q_other *= rng.gen_range(0.5..2.0);
            w.lqr_r *= 2.0;
            let gains = design_gains(&model, &w).unwrap();
            assert!(hurwitz_certificate(&model.a.sub(&model.b.matmul(gains.k()))));
        }
    }

    #[test]
    fn scalar_metric_scaling() {
        // P_raw = [4] would need a_cl = −1/8; κ = (1/4)/1, P = [1].
        let m = build_safety_metric(&scalar(-0.125), 0.0012, 0.01, 1.0).unwrap();
        assert!((m.kappa() - 0.25).abs() < 1e-15);
        assert!((m.p().mat()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn metric_rejects_bad_radii() {
        let a = Mat::diag(&[-1.0, -1.0, -1.0]);
        assert!(build_safety_metric(&a, 0.01, 0.01, 1.0).is_err());
        assert!(build_safety_metric(&a, 0.02, 0.01, 1.0).is_err());
        assert!(build_safety_metric(&a, 0.001, 1.0, 1.0).is_err());
        assert!(build_safety_metric(&a, 0.001, 0.01, 0.0).is_err());
    }

    #[test]
    fn control_law() {
        assert_eq!(control_input(&Mat::zeros(4, 12), &[1.0; 12], &[0.0; 12]), [0.0; 4]);
        let mut k = Mat::zeros(4, 12);
        k[(0, 0)] = 2.0;
        let mut xh = [0.0; 12];
        xh[0] = 3.0;
        assert_eq!(control_input(&k, &xh, &[0.0; 12])[0], -6.0);
        assert_eq!(control_input(&k, &xh, &xh), [0.0; 4]);
    }

    #[test]
    fn control_law_is_linear() {
        let model = hover_linearization(&QuadParams::default());
        let gains = design_gains(&model, &DesignWeights::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rv = || -> [f64; 12] { std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) };
        let (a, asp, b, bsp) = (rv(), rv(), rv(), rv());
        let sum: [f64; 12] = std::array::from_fn(|i| a[i] + b[i]);
        let sum_sp: [f64; 12] = std::array::from_fn(|i| asp[i] + bsp[i]);
        let ua = control_input(gains.k(), &a, &asp);
        let ub = control_input(gains.k(), &b, &bsp);
        let us = control_input(gains.k(), &sum, &sum_sp);
        for i in 0..4 {
            assert!((ua[i] + ub[i] - us[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_innovation_at_equilibrium() {
        let model = hover_linearization(&QuadParams::default());
        let gains = design_gains(&model, &DesignWeights::default()).unwrap();
        let obs = ObserverModel::new(&model, &gains);
        let mut xh = [0.0; 12];
        xh[0] = 2.0;
        xh[1] = -1.0;
        xh[2] = 4.0;
        let mut y = [0.0; 6];
        model.c.mul_vec_into(&xh, &mut y);
        let next = observer_step(&obs, &xh, &[0.0; 4], &y, 1e-3).unwrap();
        for i in 0..12 {
            assert!((next[i] - xh[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gain_runs_open_loop() {
        let model = hover_linearization(&QuadParams::default());
        let obs = ObserverModel { a: model.a.clone(), b: model.b.clone(), c: model.c.clone(), l: Mat::zeros(12, 6) };
        let mut xh = [0.0; 12];
        xh[7] = 0.01;
        let next = observer_step(&obs, &xh, &[0.0; 4], &[5.0; 6], 1e-2).unwrap();
        let open = rk4_step(
            |s: &[f64; 12], _: &[f64; 0]| {
                let v = model.a.mul_vec(s);
                std::array::from_fn(|i| v[i])
            },
            &xh,
            &[],
            1e-2,
        )
        .unwrap();
        assert_eq!(next, open);
    }
}
