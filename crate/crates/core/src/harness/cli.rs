use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::governor::{AlphaPolicy, AlphaRule};
use crate::numkit::Mat;
use crate::sac::load_model;

use super::config::{PolicyKind, RunConfig};
use super::design::{build_design, Design};
use super::episode::{run_episode, EpisodeOptions};
use super::evaluate::{evaluate, seed_range};
use super::export::{cycle_series_csv, episode_summary, export_traces, write_file};
use super::train::{log_path_for, train_to_files};
use super::HarnessError;

#[derive(Debug, Parser)]
#[command(name = "srlab", version, about = "Software-rejuvenation quadrotor missions with learned setpoint steps")]
struct Cli {
    /// TOML configuration file; SRLAB_<KEY> environment variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Conservative,
    Baseline,
    Rl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print gains, the safety metric and the step bounds.
    Design,
    /// Fly one mission and write its trace.
    Run {
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train the step-size policy.
    Train {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Model output path (default: <out_dir>/model.sac).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a trained policy with the baseline governor.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, HarnessError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Design => {
            let design = build_design(&cfg)?;
            print!("{}", design_report(&design));
            Ok(0)
        }
        Command::Run { policy, model, seed, out_dir } => {
            if let Some(p) = policy {
                cfg.policy = match p {
                    PolicyArg::Conservative => PolicyKind::Conservative,
                    PolicyArg::Baseline => PolicyKind::Baseline,
                    PolicyArg::Rl => PolicyKind::Rl,
                };
            }
            if model.is_some() {
                cfg.model = model;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            run_command(&cfg)
        }
        Command::Train { steps, seed, out } => {
            if let Some(s) = steps {
                cfg.total_steps = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let design = build_design(&cfg)?;
            let path = out.unwrap_or_else(|| cfg.out_dir.join("model.sac"));
            let outcome = train_to_files(&cfg, &design, cfg.total_steps, &path)?;
            println!(
                "trained {} env steps over {} episodes; model {} log {}",
                outcome.env_steps,
                outcome.log.len(),
                path.display(),
                log_path_for(&path).display()
            );
            Ok(0)
        }
        Command::Eval { model, episodes, seed, out_dir } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            let n = episodes.unwrap_or(cfg.eval_episodes);
            let design = build_design(&cfg)?;
            let agent = Arc::new(load_model(&model)?);
            let report = evaluate(&design, agent, &seed_range(cfg.seed, n), cfg.cycle_cap)?;
            write_file(&cfg.out_dir.join("eval_summary.toml"), &report.summary_text())?;
            let mut all = report.rl.clone();
            all.extend(report.baseline.iter().cloned());
            write_file(&cfg.out_dir.join("eval_cycles.csv"), &cycle_series_csv(&all))?;
            let (r, b) = (&report.rl_stats, &report.baseline_stats);
            println!(
                "rl: success {:.0}% mean time {:.3} s, mean MC peak est {:.5}; baseline: success {:.0}% mean time {:.3} s, mean MC peak est {:.5}",
                100.0 * r.success_rate,
                r.mean_mission_time,
                r.mean_mc_peak_est,
                100.0 * b.success_rate,
                b.mean_mission_time,
                b.mean_mc_peak_est
            );
            if r.success_rate < 1.0 || b.success_rate < 1.0 {
                eprintln!("error: some evaluation episodes failed");
                return Ok(2);
            }
            Ok(0)
        }
    }
}

fn run_command(cfg: &RunConfig) -> Result<i32, HarnessError> {
    let design = build_design(cfg)?;
    let policy = match cfg.policy {
        PolicyKind::Conservative => AlphaPolicy::new(AlphaRule::Conservative, design.alpha_max)?,
        PolicyKind::Baseline => AlphaPolicy::new(AlphaRule::Baseline, design.alpha_max)?,
        PolicyKind::Rl => {
            let path = cfg.model.as_deref().ok_or_else(|| HarnessError::Config("policy rl needs --model".into()))?;
            AlphaPolicy::learned(Arc::new(load_model(path)?))?
        }
    };
    let opts = EpisodeOptions {
        seed: cfg.seed,
        deterministic: true,
        decimation: cfg.trace_decimation,
        cycle_cap: cfg.cycle_cap,
    };
    let (result, traces) = run_episode(&design, &policy, &opts)?;
    let dir: &Path = &cfg.out_dir;
    export_traces(&traces, &dir.join("trace.csv"))?;
    write_file(&dir.join("summary.toml"), &episode_summary(&result, cfg, policy.alpha_max))?;
    write_file(&dir.join("cycles.csv"), &cycle_series_csv(std::slice::from_ref(&result)))?;
    match result.failure() {
        None => {
            println!(
                "{}: success in {:.3} s over {} cycles; outputs in {}",
                result.policy,
                result.mission_time,
                result.cycles(),
                dir.display()
            );
            Ok(0)
        }
        Some(f) => {
            eprintln!("error: {} mission failed ({}) after {} cycles", result.policy, f.as_str(), result.cycles());
            Ok(2)
        }
    }
}

fn format_mat(name: &str, m: &Mat) -> String {
    let mut out = format!("{name} ({}x{}):\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>12.5e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn design_report(d: &Design) -> String {
    let mut out = String::new();
    out.push_str(&format_mat("K", d.gains.k()));
    out.push_str(&format_mat("L", d.gains.l()));
    out.push_str(&format_mat("P", d.metric.p().mat()));
    out.push_str(&format!(
        "certificate A-BK: {}\ncertificate A-LC: {}\n",
        if d.controller_certified() { "pass" } else { "FAIL" },
        if d.observer_certified() { "pass" } else { "FAIL" }
    ));
    out.push_str(&format!(
        "rho_s = {}\nrho_m = {}\nkappa = {:.6e}\n",
        d.metric.rho_s(),
        d.metric.rho_m(),
        d.metric.kappa()
    ));
    out.push_str(&format!("conservative alpha = {:.6}\n", d.conservative_alpha()));
    out.push_str(&format!(
        "alpha_max = {:.6} ({})\n",
        d.alpha_max,
        if d.alpha_max_derived { "derived" } else { "configured" }
    ));
    out
}
