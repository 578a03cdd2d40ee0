//! Model persistence. Layout is documented in `docs/model_format.md`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::agent::{AgentHyper, SacAgent};
use super::mlp::{Dense, Mlp};
use super::policy::GaussianPolicy;

pub const MAGIC: &str = "SRLAB-SAC-MODEL";
pub const FORMAT_VERSION: u32 = 1;
pub const PARAMS_MARKER: &str = "%%PARAMS";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    state_dim: usize,
    hidden: Vec<usize>,
    action_dim: usize,
    beta: f64,
    log_beta: f64,
    tau: f64,
    gamma: f64,
    lr: f64,
    target_entropy: f64,
    alpha_max: f64,
    adam_steps_policy: u64,
    adam_steps_q1: u64,
    adam_steps_q2: u64,
    adam_steps_beta: u64,
    param_count: usize,
}

fn put(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_net(out: &mut Vec<u8>, net: &Mlp) {
    for l in net.layers() {
        put(out, &l.w);
        put(out, &l.b);
    }
}

fn put_adam(out: &mut Vec<u8>, st: &AdamState) {
    for m in &st.m {
        put(out, m);
    }
    for v in &st.v {
        put(out, v);
    }
}

/// Serialized bytes of a model.
pub fn encode_model(agent: &SacAgent) -> Vec<u8> {
    let sizes = agent.policy.net.sizes();
    let hidden = sizes[1..sizes.len() - 1].to_vec();
    let mut body = Vec::new();

    let layers = agent.policy.net.layers();
    let (trunk, head) = layers.split_at(layers.len() - 1);
    for l in trunk {
        put(&mut body, &l.w);
        put(&mut body, &l.b);
    }
    let head = &head[0];
    let width = head.n_in;
    for row in 0..2 {
        put(&mut body, &head.w[row * width..(row + 1) * width]);
        put(&mut body, &head.b[row..row + 1]);
    }
    for net in [&agent.q1, &agent.q2, &agent.q1_target, &agent.q2_target] {
        put_net(&mut body, net);
    }
    for st in [&agent.policy_opt, &agent.q1_opt, &agent.q2_opt] {
        put_adam(&mut body, st);
    }
    put(&mut body, &[agent.log_beta, agent.beta_opt.m[0][0], agent.beta_opt.v[0][0]]);

    let manifest = Manifest {
        version: FORMAT_VERSION,
        state_dim: agent.state_dim(),
        hidden,
        action_dim: 1,
        beta: agent.beta(),
        log_beta: agent.log_beta,
        tau: agent.hyper.tau,
        gamma: agent.hyper.gamma,
        lr: agent.hyper.lr,
        target_entropy: agent.hyper.target_entropy,
        alpha_max: agent.hyper.alpha_max,
        adam_steps_policy: agent.policy_opt.t,
        adam_steps_q1: agent.q1_opt.t,
        adam_steps_q2: agent.q2_opt.t,
        adam_steps_beta: agent.beta_opt.t,
        param_count: body.len() / 8,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    let mut out = format!("{MAGIC}\n{text}{PARAMS_MARKER}\n").into_bytes();
    out.extend_from_slice(&body);
    out
}

pub fn save_model(agent: &SacAgent, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode_model(agent))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SacAgent, ModelError> {
    decode_model(&fs::read(path)?)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<Vec<f64>, ModelError> {
        let end = self.pos + n * 8;
        if end > self.data.len() {
            return Err(ModelError::SchemaMismatch("parameter section truncated".into()));
        }
        let out = self.data[self.pos..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        self.pos = end;
        Ok(out)
    }

    fn dense(&mut self, n_in: usize, n_out: usize) -> Result<Dense, ModelError> {
        let w = self.take(n_in * n_out)?;
        let b = self.take(n_out)?;
        Ok(Dense { n_in, n_out, w, b })
    }

    fn net(&mut self, sizes: &[usize]) -> Result<Mlp, ModelError> {
        let layers = sizes.windows(2).map(|p| self.dense(p[0], p[1])).collect::<Result<_, _>>()?;
        Ok(Mlp::from_layers(layers))
    }

    fn adam(&mut self, lens: &[usize], t: u64) -> Result<AdamState, ModelError> {
        let m = lens.iter().map(|&n| self.take(n)).collect::<Result<_, _>>()?;
        let v = lens.iter().map(|&n| self.take(n)).collect::<Result<_, _>>()?;
        Ok(AdamState { m, v, t })
    }
}

fn param_lens(net: &Mlp) -> Vec<usize> {
    net.params().iter().map(|p| p.len()).collect()
}

pub fn decode_model(bytes: &[u8]) -> Result<SacAgent, ModelError> {
    let mismatch = |m: &str| ModelError::SchemaMismatch(m.to_string());
    let marker = format!("\n{PARAMS_MARKER}\n");
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| mismatch("missing parameter marker"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| mismatch("manifest is not UTF-8"))?;
    let body = &bytes[split + marker.len()..];
    let text = header.strip_prefix(MAGIC).ok_or_else(|| mismatch("bad magic line"))?;
    let manifest: Manifest = toml::from_str(text).map_err(|e| mismatch(&format!("manifest: {e}")))?;
    if manifest.version != FORMAT_VERSION {
        return Err(ModelError::SchemaMismatch(format!("version {} (expected {FORMAT_VERSION})", manifest.version)));
    }
    if manifest.action_dim != 1 || manifest.state_dim == 0 || manifest.hidden.is_empty() || manifest.hidden.contains(&0)
    {
        return Err(mismatch("unsupported network dimensions"));
    }
    if body.len() != manifest.param_count * 8 {
        return Err(ModelError::SchemaMismatch(format!(
            "parameter section has {} bytes, manifest declares {}",
            body.len(),
            manifest.param_count * 8
        )));
    }

    let mut r = Reader { data: body, pos: 0 };
    let mut pol_sizes = vec![manifest.state_dim];
    pol_sizes.extend_from_slice(&manifest.hidden);
    let width = *manifest.hidden.last().unwrap();
    let mut layers = pol_sizes.windows(2).map(|p| r.dense(p[0], p[1])).collect::<Result<Vec<_>, _>>()?;
    let mean_w = r.take(width)?;
    let mean_b = r.take(1)?;
    let ls_w = r.take(width)?;
    let ls_b = r.take(1)?;
    layers.push(Dense { n_in: width, n_out: 2, w: [mean_w, ls_w].concat(), b: vec![mean_b[0], ls_b[0]] });
    let policy = GaussianPolicy { net: Mlp::from_layers(layers) };

    let mut q_sizes = vec![manifest.state_dim + 1];
    q_sizes.extend_from_slice(&manifest.hidden);
    q_sizes.push(1);
    let q1 = r.net(&q_sizes)?;
    let q2 = r.net(&q_sizes)?;
    let q1_target = r.net(&q_sizes)?;
    let q2_target = r.net(&q_sizes)?;
    let policy_opt = r.adam(&param_lens(&policy.net), manifest.adam_steps_policy)?;
    let q1_opt = r.adam(&param_lens(&q1), manifest.adam_steps_q1)?;
    let q2_opt = r.adam(&param_lens(&q2), manifest.adam_steps_q2)?;
    let tail = r.take(3)?;
    if r.pos != body.len() {
        return Err(mismatch("trailing parameter bytes"));
    }
    let beta_opt = AdamState { m: vec![vec![tail[1]]], v: vec![vec![tail[2]]], t: manifest.adam_steps_beta };

    Ok(SacAgent {
        hyper: AgentHyper {
            gamma: manifest.gamma,
            tau: manifest.tau,
            lr: manifest.lr,
            target_entropy: manifest.target_entropy,
            alpha_max: manifest.alpha_max,
        },
        policy,
        q1,
        q2,
        q1_target,
        q2_target,
        log_beta: tail[0],
        policy_opt,
        q1_opt,
        q2_opt,
        beta_opt,
    })
}
