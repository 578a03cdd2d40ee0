use std::fmt::Write as _;
use std::sync::Arc;

use crate::governor::{AlphaPolicy, AlphaRule};
use crate::sac::SacAgent;

use super::design::Design;
use super::episode::{mean, run_episode, EpisodeOptions, EpisodeResult};
use super::HarnessError;

/// Aggregate metrics of one policy over a seed set.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStats {
    pub policy: String,
    pub episodes: usize,
    pub success_rate: f64,
    /// Mean over successful episodes.
    pub mean_mission_time: f64,
    /// Mean over all cycles of all episodes.
    pub mean_mc_peak_est: f64,
    pub mean_mc_entry_est: f64,
    pub mean_mc_peak_true: f64,
    /// CP/MC samples whose `est_norm_sq` exceeded `ρ_m`, counted per cycle.
    pub rho_m_violations: usize,
    /// Largest `true_norm_sq` seen anywhere.
    pub max_true_norm: f64,
}

impl PolicyStats {
    pub fn from_results(results: &[EpisodeResult], rho_m: f64) -> Self {
        let n = results.len();
        let ok: Vec<&EpisodeResult> = results.iter().filter(|r| r.success()).collect();
        let all_cycles = || results.iter().flat_map(|r| r.records.iter());
        Self {
            policy: results.first().map(|r| r.policy.clone()).unwrap_or_default(),
            episodes: n,
            success_rate: if n == 0 { 0.0 } else { ok.len() as f64 / n as f64 },
            mean_mission_time: mean(ok.iter().map(|r| r.mission_time)),
            mean_mc_peak_est: mean(all_cycles().map(|c| c.mc_peak_est)),
            mean_mc_entry_est: mean(all_cycles().map(|c| c.mc_entry_est)),
            mean_mc_peak_true: mean(all_cycles().map(|c| c.mc_peak_true)),
            rho_m_violations: all_cycles().filter(|c| c.mc_peak_est > rho_m).count(),
            max_true_norm: results.iter().map(|r| r.max_r_mpn()).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub seeds: Vec<u64>,
    pub rl: Vec<EpisodeResult>,
    pub baseline: Vec<EpisodeResult>,
    pub rl_stats: PolicyStats,
    pub baseline_stats: PolicyStats,
}

impl EvalReport {
    /// Relative mission-time reduction of RL against the baseline.
    pub fn time_reduction(&self) -> f64 {
        1.0 - self.rl_stats.mean_mission_time / self.baseline_stats.mean_mission_time
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seeds = {:?}", self.seeds);
        let _ = writeln!(out, "time_reduction = {}", self.time_reduction());
        for s in [&self.rl_stats, &self.baseline_stats] {
            let _ = writeln!(out, "\n[{}]", s.policy);
            let _ = writeln!(out, "episodes = {}", s.episodes);
            let _ = writeln!(out, "success_rate = {}", s.success_rate);
            let _ = writeln!(out, "mean_mission_time = {}", s.mean_mission_time);
            let _ = writeln!(out, "mean_mc_entry_est = {}", s.mean_mc_entry_est);
            let _ = writeln!(out, "mean_mc_peak_est = {}", s.mean_mc_peak_est);
            let _ = writeln!(out, "mean_mc_peak_true = {}", s.mean_mc_peak_true);
            let _ = writeln!(out, "rho_m_violations = {}", s.rho_m_violations);
            let _ = writeln!(out, "max_true_norm = {}", s.max_true_norm);
        }
        let _ = writeln!(out, "\n# per-episode mission time (s), 'fail:<cause>' when unsuccessful");
        for (r, b) in self.rl.iter().zip(&self.baseline) {
            let _ = writeln!(out, "# seed {}: rl {} baseline {}", r.seed, describe(r), describe(b));
        }
        out
    }
}

fn describe(r: &EpisodeResult) -> String {
    match r.failure() {
        None => format!("{:.3}", r.mission_time),
        Some(f) => format!("fail:{}", f.as_str()),
    }
}

/// Runs the learned policy deterministically and the baseline governor on
/// the same seeds.
pub fn evaluate(
    design: &Design,
    agent: Arc<SacAgent>,
    seeds: &[u64],
    cycle_cap: usize,
) -> Result<EvalReport, HarnessError> {
    let rl_policy = AlphaPolicy::learned(agent)?;
    let base_policy = AlphaPolicy::new(AlphaRule::Baseline, design.alpha_max)?;
    let mut rl = Vec::with_capacity(seeds.len());
    let mut baseline = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let opts = EpisodeOptions { seed, deterministic: true, decimation: 0, cycle_cap };
        rl.push(run_episode(design, &rl_policy, &opts)?.0);
        baseline.push(run_episode(design, &base_policy, &opts)?.0);
    }
    let rho_m = design.metric.rho_m();
    Ok(EvalReport {
        seeds: seeds.to_vec(),
        rl_stats: PolicyStats::from_results(&rl, rho_m),
        baseline_stats: PolicyStats::from_results(&baseline, rho_m),
        rl,
        baseline,
    })
}

/// `base, base + 1, …`.
pub fn seed_range(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}
