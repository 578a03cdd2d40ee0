//! Setpoint governors: each recovery instant moves the hover setpoint a step
//! `α` along the active waypoint segment.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ObserverEstimate, SafetyMetric};
use crate::plant::{VehicleState, STATE_DIM};
use crate::sac::SacAgent;

/// A hover target: position set, every other component zero.
pub type Setpoint = VehicleState;
pub type Waypoint = [f64; 3];

/// Below this Euclidean distance two positions are treated as coincident.
pub const DIRECTION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GovernorError {
    #[error("setpoint coincides with the next waypoint")]
    DegenerateDirection,
    #[error("governor called outside recovery: est norm {norm_sq} > rho_s {rho_s}")]
    PreconditionViolated { norm_sq: f64, rho_s: f64 },
    #[error("learned policy has no model loaded")]
    ModelNotLoaded,
    #[error("invalid mission: {0}")]
    InvalidMission(String),
    #[error("invalid governor parameter: {0}")]
    InvalidParameter(String),
}

pub fn hover_setpoint(pos: Waypoint) -> Setpoint {
    let mut sp = [0.0; STATE_DIM];
    sp[..3].copy_from_slice(&pos);
    sp
}

pub fn position(x: &VehicleState) -> Waypoint {
    [x[0], x[1], x[2]]
}

fn distance(a: &Waypoint, b: &Waypoint) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    pub waypoints: Vec<Waypoint>,
    pub goal_tol: f64,
}

impl Default for Mission {
    fn default() -> Self {
        Self { waypoints: vec![[1.0, 1.0, 1.0], [5.0, 5.0, 5.0]], goal_tol: 0.05 }
    }
}

impl Mission {
    pub fn validate(&self) -> Result<(), GovernorError> {
        if self.waypoints.len() < 2 {
            return Err(GovernorError::InvalidMission("need at least two waypoints".into()));
        }
        if self.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GovernorError::InvalidMission("waypoints must be finite".into()));
        }
        for (i, w) in self.waypoints.windows(2).enumerate() {
            if distance(&w[0], &w[1]) < DIRECTION_EPS {
                return Err(GovernorError::InvalidMission(format!("waypoints {i} and {} coincide", i + 1)));
            }
        }
        if !(self.goal_tol > 0.0) {
            return Err(GovernorError::InvalidMission("goal_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn start(&self) -> Waypoint {
        self.waypoints[0]
    }

    pub fn goal(&self) -> Waypoint {
        *self.waypoints.last().unwrap()
    }

    /// Total length of the polyline.
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }
}

/// Index of the waypoint the setpoint is currently heading to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissionProgress {
    pub target: usize,
}

impl MissionProgress {
    pub fn new() -> Self {
        Self { target: 1 }
    }

    /// True once the setpoint sits on the final waypoint.
    pub fn finished(&self, mission: &Mission) -> bool {
        self.target >= mission.waypoints.len()
    }

    pub fn active_waypoint(&self, mission: &Mission) -> Waypoint {
        mission.waypoints[self.target.min(mission.waypoints.len() - 1)]
    }

    /// Distance travelled along the polyline by `x_sp` (setpoints stay on
    /// the polyline, so this is exact).
    pub fn arc_position(&self, mission: &Mission, x_sp: &Setpoint) -> f64 {
        if self.finished(mission) {
            return mission.length();
        }
        let wps = &mission.waypoints[..self.target];
        let done: f64 = wps.windows(2).map(|w| distance(&w[0], &w[1])).sum();
        done + distance(&wps[self.target - 1], &position(x_sp))
    }
}

impl Default for MissionProgress {
    fn default() -> Self {
        Self::new()
    }
}

/// Unit vector from the setpoint position toward `w_next`, zero elsewhere.
pub fn unit_direction(x_sp: &Setpoint, w_next: &Waypoint) -> Result<VehicleState, GovernorError> {
    let d = distance(&position(x_sp), w_next);
    if d < DIRECTION_EPS {
        return Err(GovernorError::DegenerateDirection);
    }
    let mut v = [0.0; STATE_DIM];
    for i in 0..3 {
        v[i] = (w_next[i] - x_sp[i]) / d;
    }
    Ok(v)
}

/// `√ρ_m − √ρ_s`.
pub fn conservative_alpha(metric: &SafetyMetric) -> f64 {
    metric.rho_m().sqrt() - metric.rho_s().sqrt()
}

/// `√ρ_m − ‖x̂ − x_sp‖_P`, valid only at recovery instants.
pub fn baseline_alpha(x_hat: &ObserverEstimate, x_sp: &Setpoint, metric: &SafetyMetric) -> Result<f64, GovernorError> {
    let norm_sq = metric.norm_sq(x_hat, x_sp);
    if norm_sq > metric.rho_s() {
        return Err(GovernorError::PreconditionViolated { norm_sq, rho_s: metric.rho_s() });
    }
    Ok(metric.rho_m().sqrt() - norm_sq.sqrt())
}

/// Affine map of a raw action in [−1, 1] onto [0, alpha_max].
#[inline]
pub fn action_to_alpha(raw: f64, alpha_max: f64) -> f64 {
    (alpha_max * (raw + 1.0) / 2.0).clamp(0.0, alpha_max)
}

/// MDP state `x̂ − x_sp`.
pub fn mdp_state(x_hat: &ObserverEstimate, x_sp: &Setpoint) -> VehicleState {
    let mut s = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        s[i] = x_hat[i] - x_sp[i];
    }
    s
}

/// Which rule picks the step size.
#[derive(Debug, Clone)]
pub enum AlphaRule {
    Conservative,
    Baseline,
    Learned(Option<Arc<SacAgent>>),
}

#[derive(Debug, Clone)]
pub struct AlphaPolicy {
    pub rule: AlphaRule,
    pub alpha_max: f64,
}

/// The chosen step and, for the learned rule, the raw action behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub raw_action: Option<f64>,
}

impl AlphaPolicy {
    pub fn new(rule: AlphaRule, alpha_max: f64) -> Result<Self, GovernorError> {
        if !(alpha_max.is_finite() && alpha_max > 0.0) {
            return Err(GovernorError::InvalidParameter(format!("alpha_max must be positive, got {alpha_max}")));
        }
        Ok(Self { rule, alpha_max })
    }

    /// Learned rule using the model's own `alpha_max`.
    pub fn learned(agent: Arc<SacAgent>) -> Result<Self, GovernorError> {
        let alpha_max = agent.hyper.alpha_max;
        Self::new(AlphaRule::Learned(Some(agent)), alpha_max)
    }

    pub fn name(&self) -> &'static str {
        match self.rule {
            AlphaRule::Conservative => "conservative",
            AlphaRule::Baseline => "baseline",
            AlphaRule::Learned(_) => "rl",
        }
    }

    /// Picks α at a recovery instant. The result always lies in
    /// `[0, alpha_max]`.
    pub fn choose<R: Rng + ?Sized>(
        &self,
        x_hat: &ObserverEstimate,
        x_sp: &Setpoint,
        metric: &SafetyMetric,
        deterministic: bool,
        rng: &mut R,
    ) -> Result<AlphaChoice, GovernorError> {
        let (alpha, raw_action) = match &self.rule {
            AlphaRule::Conservative => (conservative_alpha(metric), None),
            AlphaRule::Baseline => (baseline_alpha(x_hat, x_sp, metric)?, None),
            AlphaRule::Learned(agent) => {
                let raw = learned_raw_action(agent.as_deref(), &mdp_state(x_hat, x_sp), deterministic, rng)?;
                (action_to_alpha(raw, self.alpha_max), Some(raw))
            }
        };
        Ok(AlphaChoice { alpha: alpha.clamp(0.0, self.alpha_max), raw_action })
    }
}

/// Raw policy action for MDP state `s`.
pub fn learned_raw_action<R: Rng + ?Sized>(
    agent: Option<&SacAgent>,
    s: &VehicleState,
    deterministic: bool,
    rng: &mut R,
) -> Result<f64, GovernorError> {
    let agent = agent.ok_or(GovernorError::ModelNotLoaded)?;
    Ok(agent.act(s, deterministic, rng))
}

/// `x_sp + α·v`, snapped to `target` when the step would reach or pass it.
pub fn apply_setpoint(x_sp: &Setpoint, alpha: f64, v: &VehicleState, target: &Waypoint) -> (Setpoint, bool) {
    let remaining = distance(&position(x_sp), target);
    if alpha >= remaining {
        return (hover_setpoint(*target), true);
    }
    let mut next = *x_sp;
    for i in 0..3 {
        next[i] += alpha * v[i];
    }
    (next, false)
}

/// One governor decision applied to the mission: direction toward the
/// active waypoint, step, and waypoint advance. A finished mission leaves
/// the setpoint in place.
pub fn advance_setpoint(
    x_sp: &Setpoint,
    alpha: f64,
    mission: &Mission,
    progress: &mut MissionProgress,
) -> Result<Setpoint, GovernorError> {
    if progress.finished(mission) {
        return Ok(*x_sp);
    }
    let target = progress.active_waypoint(mission);
    let v = unit_direction(x_sp, &target)?;
    let (next, reached) = apply_setpoint(x_sp, alpha, &v, &target);
    if reached {
        progress.target += 1;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn direction_examples() {
        let v = unit_direction(&hover_setpoint([1.0, 1.0, 1.0]), &[5.0, 5.0, 5.0]).unwrap();
        let c = 1.0 / 3f64.sqrt();
        assert!(v[..3].iter().all(|&x| approx(x, c, 1e-15)));
        assert!(v[3..].iter().all(|&x| x == 0.0));
        let v = unit_direction(&hover_setpoint([0.0; 3]), &[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(&v[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(
            unit_direction(&hover_setpoint([2.0, 0.0, 0.0]), &[2.0, 0.0, 0.0]),
            Err(GovernorError::DegenerateDirection)
        );
    }

    #[test]
    fn apply_examples() {
        let c = 1.0 / 3f64.sqrt();
        let v = hover_setpoint([c, c, c]);
        let (sp, reached) = apply_setpoint(&hover_setpoint([1.0; 3]), 0.0653590, &v, &[5.0; 3]);
        assert!(!reached);
        for x in &sp[..3] {
            assert!(approx(*x, 1.0377350, 1e-7), "{x}");
        }
        let start = hover_setpoint([1.0; 3]);
        assert_eq!(apply_setpoint(&start, 0.0, &v, &[5.0; 3]), (start, false));

        let goal = [5.0; 3];
        let near = hover_setpoint([5.0 - 0.01 * c, 5.0 - 0.01 * c, 5.0 - 0.01 * c]);
        assert_eq!(apply_setpoint(&near, 0.1, &v, &goal), (hover_setpoint(goal), true));
    }

    #[test]
    fn action_map_endpoints() {
        assert_eq!(action_to_alpha(1.0, 0.3), 0.3);
        assert_eq!(action_to_alpha(-1.0, 0.3), 0.0);
        assert_eq!(action_to_alpha(0.0, 0.3), 0.15);
    }

    #[test]
    fn mission_validation() {
        assert!(Mission::default().validate().is_ok());
        let one = Mission { waypoints: vec![[0.0; 3]], goal_tol: 0.05 };
        assert!(matches!(one.validate(), Err(GovernorError::InvalidMission(_))));
        let dup = Mission { waypoints: vec![[1.0; 3], [1.0; 3]], goal_tol: 0.05 };
        assert!(matches!(dup.validate(), Err(GovernorError::InvalidMission(_))));
    }

    #[test]
    fn advance_walks_multi_segment_mission() {
        let mission = Mission { waypoints: vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]], goal_tol: 0.05 };
        let mut prog = MissionProgress::new();
        let mut sp = hover_setpoint(mission.start());
        let mut last_arc = 0.0;
        let mut steps = 0;
        while !prog.finished(&mission) {
            sp = advance_setpoint(&sp, 0.3, &mission, &mut prog).unwrap();
            let arc = prog.arc_position(&mission, &sp);
            assert!(arc >= last_arc);
            last_arc = arc;
            steps += 1;
        }
        // 0.3, 0.6, 0.9, snap at 1.0, then 1.3, 1.6, 1.9, snap at 2.0.
        assert_eq!(steps, 8);
        assert_eq!(position(&sp), [1.0, 1.0, 0.0]);
        assert_eq!(last_arc, 2.0);
        assert_eq!(advance_setpoint(&sp, 0.3, &mission, &mut prog).unwrap(), sp);
    }

    #[test]
    fn learned_without_model() {
        let pol = AlphaPolicy::new(AlphaRule::Learned(None), 0.1).unwrap();
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let z = [0.0; STATE_DIM];
        assert_eq!(learned_raw_action(None, &z, true, &mut rng), Err(GovernorError::ModelNotLoaded));
        assert_eq!(pol.name(), "rl");
    }
}
