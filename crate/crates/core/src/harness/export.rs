//! CSV traces and plain-text summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::srsm::{CycleTrace, TraceRow};

use super::config::RunConfig;
use super::episode::EpisodeResult;
use super::HarnessError;

const STATE_NAMES: [&str; 12] = ["px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw", "wx", "wy", "wz"];

pub fn trace_header() -> String {
    let mut cols = vec!["t".to_string(), "mode".to_string()];
    cols.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    cols.extend(STATE_NAMES.iter().map(|s| format!("xh_{s}")));
    cols.extend(["sp_px", "sp_py", "sp_pz", "norm_true", "norm_est", "u1", "u2", "u3", "u4"].map(String::from));
    cols.join(",")
}

fn push_row(out: &mut String, r: &TraceRow) {
    let _ = write!(out, "{},{}", r.t, r.mode);
    for v in r.x.iter().chain(&r.x_hat).chain(&r.x_sp[..3]) {
        let _ = write!(out, ",{v}");
    }
    let _ = write!(out, ",{},{}", r.norm_true, r.norm_est);
    for v in &r.u {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

/// The whole trace as CSV text. Floats use the shortest representation that
/// reads back to the same value.
pub fn trace_csv(traces: &[CycleTrace]) -> String {
    let n: usize = traces.iter().map(|t| t.rows.len()).sum();
    let mut out = String::with_capacity(512 * (n + 1));
    out.push_str(&trace_header());
    out.push('\n');
    for t in traces {
        for r in &t.rows {
            push_row(&mut out, r);
        }
    }
    out
}

pub fn export_traces(traces: &[CycleTrace], path: &Path) -> Result<(), HarnessError> {
    if traces.is_empty() {
        return Err(HarnessError::Runtime("no traces to export".into()));
    }
    write_file(path, &trace_csv(traces))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// Per-cycle series of one or more episodes.
pub fn cycle_series_csv(episodes: &[EpisodeResult]) -> String {
    let mut out = String::from("policy,seed,cycle,alpha,r_mpn,mc_entry_est,mc_peak_est,mc_peak_true,reward,duration\n");
    for e in episodes {
        for (i, r) in e.records.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                e.policy,
                e.seed,
                i,
                r.alpha,
                r.r_mpn,
                r.mc_entry_est,
                r.mc_peak_est,
                r.mc_peak_true,
                r.reward,
                r.steps as f64 * e.dt
            );
        }
    }
    out
}

/// TOML-formatted summary of one episode plus the configuration used.
pub fn episode_summary(result: &EpisodeResult, cfg: &RunConfig, alpha_max: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[episode]");
    let _ = writeln!(out, "policy = \"{}\"", result.policy);
    let _ = writeln!(out, "seed = {}", result.seed);
    let _ = writeln!(out, "success = {}", result.success());
    let _ = writeln!(out, "failure = \"{}\"", result.failure().map(|f| f.as_str()).unwrap_or("none"));
    let _ = writeln!(out, "mission_time = {}", result.mission_time);
    let _ = writeln!(out, "cycles = {}", result.cycles());
    let _ = writeln!(out, "return = {}", result.episode_return);
    let _ = writeln!(out, "alpha_max = {alpha_max}");
    let _ = writeln!(out, "mean_alpha = {}", super::episode::mean(result.records.iter().map(|r| r.alpha)));
    let _ = writeln!(out, "mean_mc_entry_est = {}", result.mean_mc_entry_est());
    let _ = writeln!(out, "mean_mc_peak_est = {}", result.mean_mc_peak_est());
    let _ = writeln!(out, "max_mc_est = {}", result.max_mc_est());
    let _ = writeln!(out, "max_r_mpn = {}", result.max_r_mpn());
    let _ = writeln!(out, "\n[config]");
    out.push_str(&cfg.to_toml());
    out
}
