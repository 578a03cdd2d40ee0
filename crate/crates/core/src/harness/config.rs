//! Run configuration: one flat TOML table, optionally overridden per key by
//! `SRLAB_<KEY>` environment variables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::DesignWeights;
use crate::governor::{Mission, Waypoint};
use crate::plant::{MeasurementNoise, QuadParams};
use crate::sac::SacConfig;
use crate::srsm::SRConfig;

use super::HarnessError;

pub const ENV_PREFIX: &str = "SRLAB_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Conservative,
    Baseline,
    Rl,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Conservative => "conservative",
            PolicyKind::Baseline => "baseline",
            PolicyKind::Rl => "rl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // plant
    pub mass: f64,
    pub gravity: f64,
    pub inertia: [f64; 3],
    pub meas_noise_pos: f64,
    pub meas_noise_ang: f64,
    // gains and metric
    pub lqr_q_pos: f64,
    pub lqr_q_other: f64,
    pub lqr_r: f64,
    pub obs_q: f64,
    pub obs_q_unmeasured: f64,
    pub obs_r: f64,
    pub rho_s: f64,
    pub rho_m: f64,
    pub d_safe: f64,
    // mode machine
    pub t_mc: f64,
    pub t_rb: f64,
    pub t_est: f64,
    pub dt: f64,
    pub v_unstable: f64,
    pub t_sc_max: f64,
    // governor
    pub waypoints: Vec<Waypoint>,
    pub goal_tol: f64,
    /// Unset: derived from the metric and the mission (see `design`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    pub policy: PolicyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    // harness
    pub seed: u64,
    pub out_dir: PathBuf,
    pub trace_decimation: usize,
    pub cycle_cap: usize,
    pub eval_episodes: usize,
    // learner
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    pub target_entropy: f64,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub total_steps: usize,
    pub init_beta: f64,
    pub hidden: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let q = QuadParams::default();
        let w = DesignWeights::default();
        let sr = SRConfig::default();
        let m = Mission::default();
        let sac = SacConfig::default();
        let noise = MeasurementNoise::default();
        Self {
            mass: q.mass,
            gravity: q.gravity,
            inertia: q.inertia,
            meas_noise_pos: noise.std[0],
            meas_noise_ang: noise.std[3],
            lqr_q_pos: w.lqr_q_pos,
            lqr_q_other: w.lqr_q_other,
            lqr_r: w.lqr_r,
            obs_q: w.obs_q,
            obs_q_unmeasured: w.obs_q_unmeasured,
            obs_r: w.obs_r,
            rho_s: 0.0012,
            rho_m: 0.01,
            d_safe: 4.0,
            t_mc: sr.t_mc,
            t_rb: sr.t_rb,
            t_est: sr.t_est,
            dt: sr.dt,
            v_unstable: sr.v_unstable,
            t_sc_max: sr.t_sc_max,
            waypoints: m.waypoints,
            goal_tol: m.goal_tol,
            alpha_max: None,
            policy: PolicyKind::Baseline,
            model: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
            trace_decimation: 10,
            cycle_cap: 200,
            eval_episodes: 20,
            gamma: sac.gamma,
            lr: sac.lr,
            batch_size: sac.batch_size,
            warmup_steps: sac.warmup_steps,
            updates_per_step: sac.updates_per_step,
            target_entropy: sac.target_entropy,
            tau: sac.tau,
            buffer_capacity: sac.buffer_capacity,
            total_steps: sac.total_steps,
            init_beta: sac.init_beta,
            hidden: sac.hidden,
        }
    }
}

impl RunConfig {
    /// Parses a TOML document, applies overrides from `env` and validates.
    pub fn from_toml_with_env<I>(text: &str, env: I) -> Result<Self, HarnessError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for (name, value) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            table.insert(key.to_ascii_lowercase(), parse_env_value(&value));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Self::from_toml_with_env(text, std::iter::empty())
    }

    /// Reads `path` (or starts from defaults when `None`) and applies the
    /// process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, HarnessError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn quad_params(&self) -> QuadParams {
        QuadParams { mass: self.mass, gravity: self.gravity, inertia: self.inertia }
    }

    pub fn noise(&self) -> MeasurementNoise {
        MeasurementNoise::new(self.meas_noise_pos, self.meas_noise_ang)
    }

    pub fn weights(&self) -> DesignWeights {
        DesignWeights {
            lqr_q_pos: self.lqr_q_pos,
            lqr_q_other: self.lqr_q_other,
            lqr_r: self.lqr_r,
            obs_q: self.obs_q,
            obs_q_unmeasured: self.obs_q_unmeasured,
            obs_r: self.obs_r,
        }
    }

    pub fn sr(&self) -> SRConfig {
        SRConfig {
            t_mc: self.t_mc,
            t_rb: self.t_rb,
            t_est: self.t_est,
            dt: self.dt,
            v_unstable: self.v_unstable,
            t_sc_max: self.t_sc_max,
        }
    }

    pub fn mission(&self) -> Mission {
        Mission { waypoints: self.waypoints.clone(), goal_tol: self.goal_tol }
    }

    pub fn sac(&self) -> SacConfig {
        SacConfig {
            gamma: self.gamma,
            lr: self.lr,
            batch_size: self.batch_size,
            warmup_steps: self.warmup_steps,
            updates_per_step: self.updates_per_step,
            target_entropy: self.target_entropy,
            tau: self.tau,
            buffer_capacity: self.buffer_capacity,
            total_steps: self.total_steps,
            init_beta: self.init_beta,
            hidden: self.hidden.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |e: String| HarnessError::Config(e);
        self.quad_params().validate().map_err(|e| cfg(e.to_string()))?;
        if !(self.meas_noise_pos >= 0.0 && self.meas_noise_ang >= 0.0) {
            return Err(cfg("measurement noise must be non-negative".into()));
        }
        if !(0.0 < self.rho_s && self.rho_s < self.rho_m && self.rho_m < 1.0) {
            return Err(cfg(format!("need 0 < rho_s < rho_m < 1, got {} and {}", self.rho_s, self.rho_m)));
        }
        if !(self.d_safe > 0.0) {
            return Err(cfg("d_safe must be positive".into()));
        }
        self.sr().validate().map_err(|e| cfg(e.to_string()))?;
        self.mission().validate().map_err(|e| cfg(e.to_string()))?;
        if let Some(a) = self.alpha_max {
            if !(a.is_finite() && a > 0.0) {
                return Err(cfg(format!("alpha_max must be positive, got {a}")));
            }
        }
        if self.cycle_cap == 0 {
            return Err(cfg("cycle_cap must be positive".into()));
        }
        self.sac().validate().map_err(cfg)?;
        Ok(())
    }
}

/// An override value is read as a TOML value when it parses as one, and as a
/// bare string otherwise.
fn parse_env_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml("rho_q = 1.0").unwrap_err();
        assert!(matches!(err, HarnessError::Config(m) if m.contains("rho_q")));
    }

    #[test]
    fn file_values_and_env_overrides() {
        let text = "seed = 3\nrho_m = 0.02\npolicy = \"conservative\"\n";
        let env = vec![
            ("SRLAB_SEED".to_string(), "9".to_string()),
            ("SRLAB_OUT_DIR".to_string(), "runs/a".to_string()),
            ("SRLAB_WAYPOINTS".to_string(), "[[0, 0, 0], [1.0, 0, 0]]".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ];
        let cfg = RunConfig::from_toml_with_env(text, env).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.rho_m, 0.02);
        assert_eq!(cfg.policy, PolicyKind::Conservative);
        assert_eq!(cfg.out_dir, PathBuf::from("runs/a"));
        assert_eq!(cfg.waypoints, vec![[0.0; 3], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in ["rho_s = 0.02", "dt = 0.003", "waypoints = [[1,1,1]]", "gamma = 1.0", "mass = -1"] {
            assert!(matches!(RunConfig::from_toml(text), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn serialized_config_reloads() {
        let cfg = RunConfig { alpha_max: Some(0.15), seed: 42, ..RunConfig::default() };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
