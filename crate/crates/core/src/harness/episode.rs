//! The decision process: one decision per recovery instant, one SR cycle per
//! transition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{ObserverEstimate, SafetyMetric};
use crate::governor::{advance_setpoint, hover_setpoint, mdp_state, position, AlphaPolicy, MissionProgress, Setpoint};
use crate::plant::VehicleState;
use crate::srsm::{run_cycle, CycleStatus, CycleTrace};

use super::design::Design;
use super::HarnessError;

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Plant = 1,
    Policy = 2,
    Replay = 3,
    NetInit = 4,
    Update = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// `−r_mpn − ‖x_end − x_goal‖²_P`.
pub fn reward(trace: &CycleTrace, x_end: &VehicleState, x_goal: &Setpoint, metric: &SafetyMetric) -> f64 {
    -trace.r_mpn - metric.norm_sq(x_end, x_goal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Unstable,
    ScTimeout,
    CycleCap,
}

impl Failure {
    pub fn as_str(self) -> &'static str {
        match self {
            Failure::Unstable => "unstable",
            Failure::ScTimeout => "sc_timeout",
            Failure::CycleCap => "cycle_cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    Success,
    Failed(Failure),
}

/// Per-decision summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub alpha: f64,
    pub raw_action: Option<f64>,
    pub r_mpn: f64,
    pub mc_entry_est: f64,
    pub mc_peak_est: f64,
    pub mc_peak_true: f64,
    pub reward: f64,
    pub steps: usize,
    pub status: CycleStatus,
}

/// What one decision step returns to the learner.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    /// Terminal for bootstrapping: unstable cycle or mission success.
    pub done: bool,
    /// Set when the episode is over for any reason.
    pub end: Option<EpisodeEnd>,
    pub trace: CycleTrace,
}

/// Plant, estimate and setpoint between decisions.
#[derive(Debug, Clone)]
pub struct MdpAdapter<'a> {
    design: &'a Design,
    pub x: VehicleState,
    pub x_hat: ObserverEstimate,
    pub x_sp: Setpoint,
    pub progress: MissionProgress,
    pub cycles: usize,
    /// Elapsed time in steps of `dt`.
    pub steps: usize,
    pub cycle_cap: usize,
    goal: Setpoint,
    ended: Option<EpisodeEnd>,
}

impl<'a> MdpAdapter<'a> {
    /// Hover at the first waypoint with an exact estimate; the vehicle starts
    /// recovered, so the first decision happens at `t = 0`.
    pub fn new(design: &'a Design, cycle_cap: usize) -> Self {
        let start = hover_setpoint(design.mission.start());
        Self {
            design,
            x: start,
            x_hat: start,
            x_sp: start,
            progress: MissionProgress::new(),
            cycles: 0,
            steps: 0,
            cycle_cap,
            goal: hover_setpoint(design.mission.goal()),
            ended: None,
        }
    }

    /// MDP state `x̂ − x_sp`.
    pub fn state(&self) -> VehicleState {
        mdp_state(&self.x_hat, &self.x_sp)
    }

    pub fn ended(&self) -> Option<EpisodeEnd> {
        self.ended
    }

    pub fn goal(&self) -> &Setpoint {
        &self.goal
    }

    /// Moves the setpoint by `alpha` and runs one cycle.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        alpha: f64,
        rng: &mut R,
        decimation: usize,
    ) -> Result<StepOutcome, HarnessError> {
        assert!(self.ended.is_none(), "step after episode end");
        let d = self.design;
        self.x_sp = advance_setpoint(&self.x_sp, alpha, &d.mission, &mut self.progress)?;
        let out = run_cycle(&d.system, &self.x, &self.x_hat, &self.x_sp, rng, decimation, self.steps);
        self.x = out.x;
        self.x_hat = out.x_hat;
        self.steps += out.trace.steps;
        self.cycles += 1;
        let r = reward(&out.trace, &self.x, &self.goal, &d.metric);

        let at_goal = {
            let p = position(&self.x);
            let g = d.mission.goal();
            ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt() <= d.mission.goal_tol
        };
        let end = match out.trace.status {
            CycleStatus::Unstable => Some(EpisodeEnd::Failed(Failure::Unstable)),
            CycleStatus::ScTimeout => Some(EpisodeEnd::Failed(Failure::ScTimeout)),
            CycleStatus::Ok if self.progress.finished(&d.mission) && at_goal => Some(EpisodeEnd::Success),
            CycleStatus::Ok if self.cycles >= self.cycle_cap => Some(EpisodeEnd::Failed(Failure::CycleCap)),
            CycleStatus::Ok => None,
        };
        let done = matches!(end, Some(EpisodeEnd::Success) | Some(EpisodeEnd::Failed(Failure::Unstable)));
        self.ended = end;
        Ok(StepOutcome { reward: r, done, end, trace: out.trace })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub policy: String,
    pub seed: u64,
    pub end: EpisodeEnd,
    pub mission_time: f64,
    pub steps: usize,
    pub dt: f64,
    pub records: Vec<CycleRecord>,
    pub episode_return: f64,
}

impl EpisodeResult {
    pub fn success(&self) -> bool {
        self.end == EpisodeEnd::Success
    }

    pub fn cycles(&self) -> usize {
        self.records.len()
    }

    pub fn failure(&self) -> Option<Failure> {
        match self.end {
            EpisodeEnd::Success => None,
            EpisodeEnd::Failed(f) => Some(f),
        }
    }

    /// Largest `est_norm_sq` over every CP and MC sample of the episode.
    pub fn max_mc_est(&self) -> f64 {
        self.records.iter().map(|r| r.mc_peak_est).fold(0.0, f64::max)
    }

    pub fn max_r_mpn(&self) -> f64 {
        self.records.iter().map(|r| r.r_mpn).fold(0.0, f64::max)
    }

    pub fn mean_mc_peak_est(&self) -> f64 {
        mean(self.records.iter().map(|r| r.mc_peak_est))
    }

    pub fn mean_mc_entry_est(&self) -> f64 {
        mean(self.records.iter().map(|r| r.mc_entry_est))
    }

    pub fn mean_mc_peak_true(&self) -> f64 {
        mean(self.records.iter().map(|r| r.mc_peak_true))
    }
}

pub(crate) fn mean<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub seed: u64,
    pub deterministic: bool,
    /// Trace sampling factor; 0 records no rows.
    pub decimation: usize,
    pub cycle_cap: usize,
}

/// Runs one mission under `policy`. Plant noise and policy sampling draw
/// from separate streams of `opts.seed`.
pub fn run_episode(
    design: &Design,
    policy: &AlphaPolicy,
    opts: &EpisodeOptions,
) -> Result<(EpisodeResult, Vec<CycleTrace>), HarnessError> {
    let mut plant_rng = stream_rng(opts.seed, Stream::Plant);
    let mut policy_rng = stream_rng(opts.seed, Stream::Policy);
    let mut mdp = MdpAdapter::new(design, opts.cycle_cap);
    let mut records = Vec::new();
    let mut traces = Vec::new();
    let mut ret = 0.0;
    let end = loop {
        let choice = policy.choose(&mdp.x_hat, &mdp.x_sp, &design.metric, opts.deterministic, &mut policy_rng)?;
        let out = mdp.step(choice.alpha, &mut plant_rng, opts.decimation)?;
        ret += out.reward;
        let t = &out.trace;
        records.push(CycleRecord {
            alpha: choice.alpha,
            raw_action: choice.raw_action,
            r_mpn: t.r_mpn,
            mc_entry_est: t.mc_entry_est,
            mc_peak_est: t.mc_peak_est,
            mc_peak_true: t.mc_peak_true,
            reward: out.reward,
            steps: t.steps,
            status: t.status,
        });
        traces.push(out.trace);
        if let Some(end) = out.end {
            break end;
        }
    };
    let result = EpisodeResult {
        policy: policy.name().to_string(),
        seed: opts.seed,
        end,
        mission_time: mdp.steps as f64 * design.system.cfg.dt,
        steps: mdp.steps,
        dt: design.system.cfg.dt,
        records,
        episode_return: ret,
    };
    Ok((result, traces))
}
