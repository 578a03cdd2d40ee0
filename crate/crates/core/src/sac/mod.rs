//! Soft actor-critic: networks, optimizer, replay and persistence.

pub mod adam;
pub mod agent;
pub mod io;
pub mod mlp;
pub mod policy;
pub mod replay;

pub use adam::{adam_step, Adam, AdamState};
pub use agent::{join_state_action, AgentHyper, CriticLosses, PolicyLosses, SacAgent, SacConfig};
pub use io::{decode_model, encode_model, load_model, save_model, ModelError};
pub use mlp::{Dense, Mlp, MlpCache, MlpGrads};
pub use policy::GaussianPolicy;
pub use replay::{Batch, ReplayBuffer, Transition};
