use crate::control::{build_safety_metric, design_gains, GainSet, ObserverModel, SafetyMetric};
use crate::governor::{conservative_alpha, hover_setpoint, unit_direction, Mission};
use crate::numkit::{hurwitz_certificate, Mat};
use crate::plant::{hover_linearization, LinearModel};
use crate::srsm::ClosedLoop;

use super::config::RunConfig;
use super::HarnessError;

/// Everything derived from a configuration before any simulation runs.
#[derive(Debug, Clone)]
pub struct Design {
    pub model: LinearModel,
    pub gains: GainSet,
    pub metric: SafetyMetric,
    pub system: ClosedLoop,
    pub mission: Mission,
    /// Upper bound of the learned step.
    pub alpha_max: f64,
    pub alpha_max_derived: bool,
}

impl Design {
    pub fn a_bk(&self) -> Mat {
        self.model.a.sub(&self.model.b.matmul(self.gains.k()))
    }

    pub fn a_lc(&self) -> Mat {
        self.model.a.sub(&self.gains.l().matmul(&self.model.c))
    }

    pub fn controller_certified(&self) -> bool {
        hurwitz_certificate(&self.a_bk())
    }

    pub fn observer_certified(&self) -> bool {
        hurwitz_certificate(&self.a_lc())
    }

    pub fn conservative_alpha(&self) -> f64 {
        conservative_alpha(&self.metric)
    }
}

/// Largest step that keeps `‖x̂ − x_sp'‖_P ≤ √ρ_m` from any recovered state
/// on every segment: `(√ρ_m − √ρ_s) / max_seg ‖v_seg‖_P`.
pub fn safe_alpha_max(metric: &SafetyMetric, mission: &Mission) -> Result<f64, HarnessError> {
    let zero = [0.0; 12];
    let mut worst = 0.0f64;
    for seg in mission.waypoints.windows(2) {
        let v = unit_direction(&hover_setpoint(seg[0]), &seg[1]).map_err(|e| HarnessError::Config(e.to_string()))?;
        worst = worst.max(metric.norm_sq(&v, &zero).sqrt());
    }
    Ok((metric.rho_m().sqrt() - metric.rho_s().sqrt()) / worst)
}

pub fn build_design(cfg: &RunConfig) -> Result<Design, HarnessError> {
    cfg.validate()?;
    let params = cfg.quad_params();
    let model = hover_linearization(&params);
    let gains = design_gains(&model, &cfg.weights()).map_err(|e| HarnessError::Config(e.to_string()))?;
    let a_bk = model.a.sub(&model.b.matmul(gains.k()));
    let metric = build_safety_metric(&a_bk, cfg.rho_s, cfg.rho_m, cfg.d_safe)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mission = cfg.mission();
    let (alpha_max, alpha_max_derived) = match cfg.alpha_max {
        Some(a) => (a, false),
        None => (safe_alpha_max(&metric, &mission)?, true),
    };
    let observer = ObserverModel::new(&model, &gains);
    let system = ClosedLoop::new(params, cfg.noise(), gains.k().clone(), observer, metric.clone(), cfg.sr())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(Design { model, gains, metric, system, mission, alpha_max, alpha_max_derived })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_design() {
        let d = build_design(&RunConfig::default()).unwrap();
        assert!(d.controller_certified());
        assert!(d.observer_certified());
        assert!(!hurwitz_certificate(&d.model.a));
        assert!((d.conservative_alpha() - 0.0653590).abs() < 5e-8);
        assert!(d.alpha_max_derived);
        // A full step from the inner ellipsoid boundary lands exactly on the
        // outer one.
        let c = 1.0 / 3f64.sqrt();
        let mut v = [0.0; 12];
        v[..3].fill(c);
        let step = d.alpha_max * d.metric.norm_sq(&v, &[0.0; 12]).sqrt();
        assert!((step + d.metric.rho_s().sqrt() - d.metric.rho_m().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn explicit_alpha_max_is_kept() {
        let cfg = RunConfig { alpha_max: Some(0.1), ..RunConfig::default() };
        let d = build_design(&cfg).unwrap();
        assert_eq!(d.alpha_max, 0.1);
        assert!(!d.alpha_max_derived);
    }
}
