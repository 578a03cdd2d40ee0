use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::governor::action_to_alpha;
use crate::plant::STATE_DIM;
use crate::sac::{save_model, ReplayBuffer, SacAgent, Transition};

use super::config::RunConfig;
use super::design::Design;
use super::episode::{stream_rng, EpisodeEnd, MdpAdapter, Stream};
use super::HarnessError;

pub const TRAIN_LOG_HEADER: &str = "episode,steps,return,mission_time,failure,beta,critic_loss,policy_loss";

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Environment steps taken so far, including this episode.
    pub steps: usize,
    pub episode_return: f64,
    /// Set on success.
    pub mission_time: Option<f64>,
    /// `none`, a failure cause, or `truncated` when the step budget ran out.
    pub failure: String,
    pub beta: f64,
    pub critic_loss: f64,
    pub policy_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: SacAgent,
    pub log: Vec<EpisodeLog>,
    pub env_steps: usize,
}

fn nan_mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Soft actor-critic over missions. Exactly `total_steps` decisions are
/// taken; an episode cut short by the budget is logged as `truncated`.
pub fn train(cfg: &RunConfig, design: &Design, total_steps: usize) -> Result<TrainOutcome, HarnessError> {
    let sac = cfg.sac();
    let mut init_rng = stream_rng(cfg.seed, Stream::NetInit);
    let mut plant_rng = stream_rng(cfg.seed, Stream::Plant);
    let mut policy_rng = stream_rng(cfg.seed, Stream::Policy);
    let mut replay_rng = stream_rng(cfg.seed, Stream::Replay);
    let mut update_rng = stream_rng(cfg.seed, Stream::Update);

    let mut agent = SacAgent::new(STATE_DIM, &sac, design.alpha_max, &mut init_rng);
    let mut buffer = ReplayBuffer::new(sac.buffer_capacity);
    let mut log = Vec::new();
    let mut step = 0usize;
    let mut episode = 0usize;

    while step < total_steps {
        let mut mdp = MdpAdapter::new(design, cfg.cycle_cap);
        let mut ret = 0.0;
        let (mut closs, mut ploss, mut n_upd) = (0.0, 0.0, 0usize);
        let mut end = None;
        while step < total_steps {
            let s = mdp.state();
            let a = if step < sac.warmup_steps {
                policy_rng.gen_range(-1.0..1.0)
            } else {
                agent.act(&s, false, &mut policy_rng)
            };
            let out = mdp.step(action_to_alpha(a, design.alpha_max), &mut plant_rng, 0)?;
            ret += out.reward;
            buffer.push(Transition { s, a, r: out.reward, s2: mdp.state(), done: out.done });
            step += 1;

            if step >= sac.warmup_steps {
                for _ in 0..sac.updates_per_step {
                    let batch = buffer.sample(sac.batch_size, &mut replay_rng);
                    let c = agent.critic_update(&batch, &mut update_rng);
                    let p = agent.policy_update(&batch, &mut update_rng);
                    closs += 0.5 * (c.q1 + c.q2);
                    ploss += p.policy;
                    n_upd += 1;
                }
            }
            if out.end.is_some() {
                end = out.end;
                break;
            }
        }
        if !agent.is_finite() {
            return Err(HarnessError::Runtime("training diverged: non-finite network parameters".into()));
        }
        let (mission_time, failure) = match end {
            Some(EpisodeEnd::Success) => (Some(mdp.steps as f64 * design.system.cfg.dt), "none".to_string()),
            Some(EpisodeEnd::Failed(f)) => (None, f.as_str().to_string()),
            None => (None, "truncated".to_string()),
        };
        log.push(EpisodeLog {
            episode,
            steps: step,
            episode_return: ret,
            mission_time,
            failure,
            beta: agent.beta(),
            critic_loss: nan_mean(closs, n_upd),
            policy_loss: nan_mean(ploss, n_upd),
        });
        episode += 1;
    }
    Ok(TrainOutcome { agent, log, env_steps: step })
}

pub fn format_train_log(log: &[EpisodeLog]) -> String {
    let mut out = String::with_capacity(64 * (log.len() + 1));
    out.push_str(TRAIN_LOG_HEADER);
    out.push('\n');
    for e in log {
        let mt = e.mission_time.map(|t| format!("{t:.3}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.episode, e.steps, e.episode_return, mt, e.failure, e.beta, e.critic_loss, e.policy_loss
        );
    }
    out
}

/// Trains, then writes the model to `model_path` and the log next to it
/// (`<model>.log.csv`).
pub fn train_to_files(
    cfg: &RunConfig,
    design: &Design,
    total_steps: usize,
    model_path: &Path,
) -> Result<TrainOutcome, HarnessError> {
    let outcome = train(cfg, design, total_steps)?;
    if let Some(dir) = model_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    save_model(&outcome.agent, model_path)?;
    std::fs::write(log_path_for(model_path), format_train_log(&outcome.log))?;
    Ok(outcome)
}

pub fn log_path_for(model_path: &Path) -> std::path::PathBuf {
    let mut name = model_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".log.csv");
    model_path.with_file_name(name)
}
