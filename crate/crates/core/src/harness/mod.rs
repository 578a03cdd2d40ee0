//! Episodes, training, evaluation, persistence and the command line.

pub mod cli;
pub mod config;
pub mod design;
pub mod episode;
pub mod evaluate;
pub mod export;
pub mod train;

use crate::governor::GovernorError;
use crate::sac::ModelError;

pub use config::{PolicyKind, RunConfig};
pub use design::{build_design, safe_alpha_max, Design};
pub use episode::{
    reward, run_episode, stream_rng, CycleRecord, EpisodeEnd, EpisodeOptions, EpisodeResult, Failure, MdpAdapter,
    StepOutcome, Stream,
};
pub use evaluate::{evaluate, seed_range, EvalReport, PolicyStats};
pub use export::{episode_summary, export_traces, trace_csv, trace_header};
pub use train::{format_train_log, train, train_to_files, EpisodeLog, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Governor(#[from] GovernorError),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    /// 1 for bad input (configuration, model files), 2 for everything that
    /// goes wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Model(_) => 1,
            HarnessError::Governor(GovernorError::InvalidMission(_) | GovernorError::InvalidParameter(_)) => 1,
            _ => 2,
        }
    }
}
