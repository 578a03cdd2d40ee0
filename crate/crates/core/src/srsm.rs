//! Software-rejuvenation mode machine: one CP → MC → RB → SC cycle per call.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::{control_input, observer_step, ObserverEstimate, ObserverModel, SafetyMetric};
use crate::governor::Setpoint;
use crate::numkit::Mat;
use crate::plant::{measure, step_nonlinear, ControlInput, MeasurementNoise, QuadParams, VehicleState};

/// Forced `r_mpn` for an unstable cycle.
pub const UNSTABLE_R_MPN: f64 = 10.0;
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SrsmError {
    #[error("invalid SR timing: {0}")]
    InvalidTiming(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SRConfig {
    pub t_mc: f64,
    pub t_rb: f64,
    pub t_est: f64,
    pub dt: f64,
    pub v_unstable: f64,
    pub t_sc_max: f64,
}

impl Default for SRConfig {
    fn default() -> Self {
        Self { t_mc: 0.200, t_rb: 0.010, t_est: 1.7, dt: 0.001, v_unstable: 10.0, t_sc_max: 30.0 }
    }
}

/// Phase lengths in integer steps of `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCounts {
    pub mc: usize,
    pub rb: usize,
    pub est: usize,
    pub sc_max: usize,
}

impl StepCounts {
    pub fn min_cycle(&self) -> usize {
        self.mc + self.rb + self.est
    }
}

fn whole_steps(name: &str, t: f64, dt: f64) -> Result<usize, SrsmError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(SrsmError::InvalidTiming(format!("{name} must be positive, got {t}")));
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > GRID_TOL || n < 1.0 {
        return Err(SrsmError::InvalidTiming(format!("{name}={t} is not a multiple of dt={dt}")));
    }
    Ok(n as usize)
}

impl SRConfig {
    pub fn steps(&self) -> Result<StepCounts, SrsmError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SrsmError::InvalidTiming(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.v_unstable.is_finite() && self.v_unstable > 0.0) {
            return Err(SrsmError::InvalidTiming("v_unstable must be positive".into()));
        }
        let counts = StepCounts {
            mc: whole_steps("t_mc", self.t_mc, self.dt)?,
            rb: whole_steps("t_rb", self.t_rb, self.dt)?,
            est: whole_steps("t_est", self.t_est, self.dt)?,
            sc_max: whole_steps("t_sc_max", self.t_sc_max, self.dt)?,
        };
        if counts.sc_max < counts.est {
            return Err(SrsmError::InvalidTiming("t_sc_max must be at least t_est".into()));
        }
        Ok(counts)
    }

    pub fn validate(&self) -> Result<(), SrsmError> {
        self.steps().map(|_| ())
    }

    /// Unknown-control time `t_mc + t_rb`.
    pub fn t_uc(&self) -> f64 {
        self.t_mc + self.t_rb
    }

    pub fn min_cycle_time(&self) -> f64 {
        self.t_mc + self.t_rb + self.t_est
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Sc,
    Cp,
    Mc,
    Rb,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sc => "SC",
            Mode::Cp => "CP",
            Mode::Mc => "MC",
            Mode::Rb => "RB",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "SC" => Some(Mode::Sc),
            "CP" => Some(Mode::Cp),
            "MC" => Some(Mode::Mc),
            "RB" => Some(Mode::Rb),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cycle order CP → MC → RB → SC → CP. The SC → CP edge carries the
/// setpoint update; MC, RB and SC may persist.
pub fn mode_legal(from: Mode, to: Mode) -> bool {
    matches!(
        (from, to),
        (Mode::Cp, Mode::Mc)
            | (Mode::Mc, Mode::Mc)
            | (Mode::Mc, Mode::Rb)
            | (Mode::Rb, Mode::Rb)
            | (Mode::Rb, Mode::Sc)
            | (Mode::Sc, Mode::Sc)
            | (Mode::Sc, Mode::Cp)
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    x_hat: ObserverEstimate,
    x_sp: Setpoint,
}

impl Checkpoint {
    pub fn take(x_hat: &ObserverEstimate, x_sp: &Setpoint) -> Self {
        Self { x_hat: *x_hat, x_sp: *x_sp }
    }

    pub fn x_hat(&self) -> &ObserverEstimate {
        &self.x_hat
    }

    pub fn x_sp(&self) -> &Setpoint {
        &self.x_sp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleStatus {
    Ok,
    Unstable,
    ScTimeout,
}

impl CycleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleStatus::Ok => "ok",
            CycleStatus::Unstable => "unstable",
            CycleStatus::ScTimeout => "sc_timeout",
        }
    }
}

/// One sample, taken before the step that starts at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub mode: Mode,
    pub x: VehicleState,
    pub x_hat: ObserverEstimate,
    pub x_sp: Setpoint,
    pub norm_true: f64,
    pub norm_est: f64,
    pub u: ControlInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleTrace {
    /// Recorded samples (every `decimation`-th step; empty when recording
    /// is off).
    pub rows: Vec<TraceRow>,
    pub status: CycleStatus,
    /// Max of `norm_true` over every sample of the cycle, or
    /// [`UNSTABLE_R_MPN`] when unstable.
    pub r_mpn: f64,
    /// `est_norm_sq` at the CP sample, right after the setpoint update.
    pub mc_entry_est: f64,
    /// Max `est_norm_sq` over the CP and MC samples.
    pub mc_peak_est: f64,
    /// Max `true_norm_sq` over the CP and MC samples.
    pub mc_peak_true: f64,
    /// Max `true_norm_sq` over the SC samples.
    pub sc_peak_true: f64,
    /// `est_norm_sq` at the first SC sample (after rollback).
    pub sc_entry_est: f64,
    /// `est_norm_sq` of the returned estimate.
    pub end_est: f64,
    pub steps: usize,
    pub dt: f64,
}

impl CycleTrace {
    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

/// Everything a cycle needs besides the evolving state.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub params: QuadParams,
    pub noise: MeasurementNoise,
    pub k: Mat,
    pub observer: ObserverModel,
    pub metric: SafetyMetric,
    pub cfg: SRConfig,
    steps: StepCounts,
}

impl ClosedLoop {
    pub fn new(
        params: QuadParams,
        noise: MeasurementNoise,
        k: Mat,
        observer: ObserverModel,
        metric: SafetyMetric,
        cfg: SRConfig,
    ) -> Result<Self, SrsmError> {
        let steps = cfg.steps()?;
        Ok(Self { params, noise, k, observer, metric, cfg, steps })
    }

    pub fn steps(&self) -> StepCounts {
        self.steps
    }
}

/// Result of one cycle: the state at the next CP instant and the telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub x: VehicleState,
    pub x_hat: ObserverEstimate,
    pub trace: CycleTrace,
}

/// Runs one SR cycle starting at CP with the setpoint already updated.
///
/// `decimation` selects which samples are kept in `trace.rows` (0 keeps
/// none); samples are numbered from `step_offset`, which also sets the
/// recorded clock. The returned state is the first sample not consumed by
/// this cycle, i.e. the next cycle's CP sample.
pub fn run_cycle<R: Rng + ?Sized>(
    sys: &ClosedLoop,
    x: &VehicleState,
    x_hat: &ObserverEstimate,
    x_sp: &Setpoint,
    rng: &mut R,
    decimation: usize,
    step_offset: usize,
) -> CycleOutcome {
    let n = sys.steps;
    let dt = sys.cfg.dt;
    let metric = &sys.metric;
    let checkpoint = Checkpoint::take(x_hat, x_sp);

    let mut x = *x;
    let mut x_hat = *x_hat;
    let x_sp = *checkpoint.x_sp();
    let mut rows = Vec::new();
    let mut r_mpn = 0.0f64;
    let mut mc_peak_est = 0.0f64;
    let mut mc_peak_true = 0.0f64;
    let mut sc_peak_true = 0.0f64;
    let mut mc_entry_est = 0.0;
    let mut sc_entry_est = 0.0;
    let mut u: ControlInput = [0.0; 4];
    let mut prev_mode = Mode::Sc;
    let mut status = CycleStatus::Ok;
    let mut i = 0usize;

    loop {
        let mode = if i == 0 {
            Mode::Cp
        } else if i < n.mc {
            Mode::Mc
        } else if i < n.mc + n.rb {
            Mode::Rb
        } else {
            Mode::Sc
        };
        debug_assert!(mode_legal(prev_mode, mode), "{prev_mode} -> {mode}");
        if mode == Mode::Sc && prev_mode == Mode::Rb {
            x_hat = *checkpoint.x_hat();
        }

        let norm_true = metric.norm_sq(&x, &x_sp);
        let norm_est = metric.norm_sq(&x_hat, &x_sp);
        if mode == Mode::Sc {
            let sc_steps = i - n.mc - n.rb;
            if sc_steps == 0 {
                sc_entry_est = norm_est;
            }
            if sc_steps >= n.est && norm_est <= metric.rho_s() {
                break;
            }
            if sc_steps >= n.sc_max {
                status = CycleStatus::ScTimeout;
                break;
            }
        }
        if mode != Mode::Rb {
            u = control_input(&sys.k, &x_hat, &x_sp);
        }
        if i == 0 {
            mc_entry_est = norm_est;
        }
        match mode {
            Mode::Cp | Mode::Mc => {
                mc_peak_est = mc_peak_est.max(norm_est);
                mc_peak_true = mc_peak_true.max(norm_true);
            }
            Mode::Sc => sc_peak_true = sc_peak_true.max(norm_true),
            Mode::Rb => {}
        }
        r_mpn = r_mpn.max(norm_true);
        let global = step_offset + i;
        if decimation > 0 && global.is_multiple_of(decimation) {
            rows.push(TraceRow { t: global as f64 * dt, mode, x, x_hat, x_sp, norm_true, norm_est, u });
        }
        if !(norm_true <= sys.cfg.v_unstable) {
            status = CycleStatus::Unstable;
            i += 1;
            break;
        }

        let y = measure(&sys.observer.c, &x, &sys.noise, rng);
        let next_x = match step_nonlinear(&sys.params, &x, &u, dt) {
            Ok(v) => v,
            Err(_) => {
                status = CycleStatus::Unstable;
                i += 1;
                break;
            }
        };
        if mode != Mode::Rb {
            match observer_step(&sys.observer, &x_hat, &u, &y, dt) {
                Ok(v) => x_hat = v,
                Err(_) => {
                    status = CycleStatus::Unstable;
                    i += 1;
                    break;
                }
            }
        }
        x = next_x;
        prev_mode = mode;
        i += 1;
    }

    if status == CycleStatus::Unstable {
        r_mpn = UNSTABLE_R_MPN;
    }
    let end_est = metric.norm_sq(&x_hat, &x_sp);
    CycleOutcome {
        x,
        x_hat,
        trace: CycleTrace {
            rows,
            status,
            r_mpn,
            mc_entry_est,
            mc_peak_est,
            mc_peak_true,
            sc_peak_true,
            sc_entry_est,
            end_est,
            steps: i,
            dt,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legal_transitions() {
        assert!(mode_legal(Mode::Cp, Mode::Mc));
        assert!(!mode_legal(Mode::Mc, Mode::Sc));
        assert!(mode_legal(Mode::Sc, Mode::Sc));
        assert!(mode_legal(Mode::Rb, Mode::Sc));
        assert!(!mode_legal(Mode::Cp, Mode::Sc));
        assert!(!mode_legal(Mode::Sc, Mode::Mc));
    }

    #[test]
    fn default_timing() {
        let cfg = SRConfig::default();
        let n = cfg.steps().unwrap();
        assert_eq!(n, StepCounts { mc: 200, rb: 10, est: 1700, sc_max: 30_000 });
        assert_eq!(n.min_cycle(), 1910);
        assert!((cfg.min_cycle_time() - 1.910).abs() < 1e-12);
        assert!((cfg.t_uc() - 0.21).abs() < 1e-12);
    }

    #[test]
    fn off_grid_timing_rejected() {
        let cfg = SRConfig { t_rb: 0.0105, ..SRConfig::default() };
        assert!(matches!(cfg.validate(), Err(SrsmError::InvalidTiming(_))));
        let cfg = SRConfig { dt: 0.0, ..SRConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [Mode::Sc, Mode::Cp, Mode::Mc, Mode::Rb] {
            assert_eq!(Mode::parse(m.as_str()), Some(m));
        }
    }
}
