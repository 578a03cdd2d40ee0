use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, Adam, AdamState};
use super::mlp::{Mlp, MlpGrads};
use super::policy::{d_log_prob_dz, GaussianPolicy};
use super::replay::Batch;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
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

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 3e-4,
            batch_size: 256,
            warmup_steps: 1000,
            updates_per_step: 1,
            target_entropy: -1.0,
            tau: 0.005,
            buffer_capacity: 100_000,
            total_steps: 20_000,
            init_beta: 1.0,
            hidden: vec![256, 256],
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.lr > 0.0) {
            return Err("lr must be positive".into());
        }
        if !(self.init_beta > 0.0) {
            return Err("init_beta must be positive".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err("tau must lie in (0, 1]".into());
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.hidden.is_empty() {
            return Err("batch_size, buffer_capacity and hidden must be non-empty".into());
        }
        if self.hidden.contains(&0) {
            return Err("hidden widths must be positive".into());
        }
        Ok(())
    }
}

/// Hyperparameters stored with a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentHyper {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub target_entropy: f64,
    pub alpha_max: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CriticLosses {
    pub q1: f64,
    pub q2: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicyLosses {
    pub policy: f64,
    pub beta: f64,
    /// Batch mean of `−log π`.
    pub entropy: f64,
}

/// Soft actor-critic agent: policy, twin critics with targets, temperature
/// and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent {
    pub hyper: AgentHyper,
    pub policy: GaussianPolicy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_beta: f64,
    pub policy_opt: AdamState,
    pub q1_opt: AdamState,
    pub q2_opt: AdamState,
    pub beta_opt: AdamState,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, cfg: &SacConfig, alpha_max: f64, rng: &mut R) -> Self {
        let policy = GaussianPolicy::new(state_dim, &cfg.hidden, rng);
        let mut critic_sizes = vec![state_dim + 1];
        critic_sizes.extend_from_slice(&cfg.hidden);
        critic_sizes.push(1);
        let q1 = Mlp::new(&critic_sizes, rng);
        let q2 = Mlp::new(&critic_sizes, rng);
        let policy_opt = AdamState::for_params(&policy.net.params());
        let q1_opt = AdamState::for_params(&q1.params());
        let q2_opt = AdamState::for_params(&q2.params());
        Self {
            hyper: AgentHyper {
                gamma: cfg.gamma,
                tau: cfg.tau,
                lr: cfg.lr,
                target_entropy: cfg.target_entropy,
                alpha_max,
            },
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            log_beta: cfg.init_beta.ln(),
            policy_opt,
            q1_opt,
            q2_opt,
            beta_opt: AdamState::for_shapes([1]),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.policy.state_dim()
    }

    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    fn adam(&self) -> Adam {
        Adam::new(self.hyper.lr)
    }

    /// Raw action in (−1, 1): the squashed mean when `deterministic`,
    /// otherwise a sample.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], deterministic: bool, rng: &mut R) -> f64 {
        if deterministic {
            self.policy.deterministic_action(state)
        } else {
            self.policy.sample(state, rng).0
        }
    }

    /// Soft Bellman targets `r + γ(1 − d)(min Q̄(s', a') − β log π(a'|s'))`.
    pub fn critic_targets<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Vec<f64> {
        let n = batch.len;
        let next = self.policy.sample_batch(&batch.s2, n, rng);
        let sa2 = join_state_action(&batch.s2, &next.action, self.state_dim());
        let t1 = self.q1_target.predict(&sa2, n);
        let t2 = self.q2_target.predict(&sa2, n);
        let beta = self.beta();
        (0..n)
            .map(|i| {
                let soft = t1[i].min(t2[i]) - beta * next.log_prob[i];
                batch.r[i] + self.hyper.gamma * (1.0 - batch.done[i]) * soft
            })
            .collect()
    }

    /// One Adam step on both critics against the soft Bellman target,
    /// followed by Polyak averaging of the target critics.
    pub fn critic_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> CriticLosses {
        let n = batch.len;
        let y = self.critic_targets(batch, rng);
        let sa = join_state_action(&batch.s, &batch.a, self.state_dim());
        let adam = self.adam();
        let mut losses = [0.0; 2];
        for (k, (net, opt)) in
            [(&mut self.q1, &mut self.q1_opt), (&mut self.q2, &mut self.q2_opt)].into_iter().enumerate()
        {
            let (q, cache) = net.forward(&sa, n);
            let mut d_out = vec![0.0; n];
            let mut loss = 0.0;
            for i in 0..n {
                let diff = q[i] - y[i];
                loss += diff * diff;
                d_out[i] = 2.0 * diff / n as f64;
            }
            losses[k] = loss / n as f64;
            let (grads, _) = net.backward(&cache, &d_out);
            let g = grads.slices();
            adam_step(&adam, &mut net.params_mut(), &g, opt);
        }
        let tau = self.hyper.tau;
        self.q1_target.polyak_from(&self.q1, tau);
        self.q2_target.polyak_from(&self.q2, tau);
        CriticLosses { q1: losses[0], q2: losses[1] }
    }

    /// Actor loss `mean(β log π(a|s) − min(Q₁, Q₂)(s, a))` with
    /// `a = tanh(μ + σε)` for the given standard normal draws, and its
    /// gradient with respect to the policy parameters.
    pub fn actor_loss_and_grad(&self, states: &[f64], batch: usize, eps: Vec<f64>) -> (f64, MlpGrads, Vec<f64>) {
        let sample = self.policy.sample_with_noise(states, batch, eps);
        let sa = join_state_action(states, &sample.action, self.state_dim());
        let (q1, c1) = self.q1.forward(&sa, batch);
        let (q2, c2) = self.q2.forward(&sa, batch);
        let mut pick1 = vec![0.0; batch];
        let mut pick2 = vec![0.0; batch];
        let beta = self.beta();
        let mut loss = 0.0;
        for i in 0..batch {
            let q_min = if q1[i] <= q2[i] {
                pick1[i] = 1.0;
                q1[i]
            } else {
                pick2[i] = 1.0;
                q2[i]
            };
            loss += beta * sample.log_prob[i] - q_min;
        }
        loss /= batch as f64;

        // ∂Q_min/∂a from the input gradient of whichever critic was smaller.
        let sdim = self.state_dim();
        let (_, dx1) = self.q1.backward(&c1, &pick1);
        let (_, dx2) = self.q2.backward(&c2, &pick2);

        let inv_n = 1.0 / batch as f64;
        let mut d_out = vec![0.0; 2 * batch];
        for i in 0..batch {
            let a = sample.action[i];
            let dq_da = dx1[i * (sdim + 1) + sdim] + dx2[i * (sdim + 1) + sdim];
            let d_z = (beta * d_log_prob_dz(a) - dq_da * (1.0 - a * a)) * inv_n;
            let sigma = sample.log_std[i].exp();
            d_out[2 * i] = d_z;
            d_out[2 * i + 1] = if sample.log_std_live[i] { -beta * inv_n + d_z * sigma * sample.eps[i] } else { 0.0 };
        }
        let (grads, _) = self.policy.net.backward(&sample.cache, &d_out);
        (loss, grads, sample.log_prob)
    }

    /// One Adam step on the actor followed by one on the log-temperature.
    pub fn policy_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> PolicyLosses {
        let n = batch.len;
        let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let (loss, grads, log_prob) = self.actor_loss_and_grad(&batch.s, n, eps);
        let adam = self.adam();
        let g = grads.slices();
        adam_step(&adam, &mut self.policy.net.params_mut(), &g, &mut self.policy_opt);

        // Temperature loss −log β · mean(log π + H̄), log π held fixed.
        let mean_term = log_prob.iter().map(|lp| lp + self.hyper.target_entropy).sum::<f64>() / n as f64;
        let beta_loss = -self.log_beta * mean_term;
        let mut lb = [self.log_beta];
        adam_step(&adam, &mut [&mut lb[..]], &[&[-mean_term][..]], &mut self.beta_opt);
        self.log_beta = lb[0];

        let entropy = -log_prob.iter().sum::<f64>() / n as f64;
        PolicyLosses { policy: loss, beta: beta_loss, entropy }
    }

    pub fn is_finite(&self) -> bool {
        self.policy.net.is_finite() && self.q1.is_finite() && self.q2.is_finite() && self.log_beta.is_finite()
    }
}

/// Row-wise concatenation `[s, a]`.
pub fn join_state_action(states: &[f64], actions: &[f64], state_dim: usize) -> Vec<f64> {
    let n = actions.len();
    assert_eq!(states.len(), n * state_dim);
    let mut out = Vec::with_capacity(n * (state_dim + 1));
    for i in 0..n {
        out.extend_from_slice(&states[i * state_dim..(i + 1) * state_dim]);
        out.push(actions[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sac::replay::{ReplayBuffer, Transition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> SacConfig {
        SacConfig { hidden: vec![16, 16], lr: 1e-3, ..SacConfig::default() }
    }

    fn transition(r: f64, done: bool) -> Transition {
        Transition { s: [0.1; 12], a: 0.2, r, s2: [0.3; 12], done }
    }

    #[test]
    fn terminal_target_is_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = SacAgent::new(12, &small_cfg(), 1.0, &mut rng);
        let b = Batch::from_transitions(&[transition(1.0, true)]);
        assert_eq!(agent.critic_targets(&b, &mut rng), vec![1.0]);
    }

    #[test]
    fn zero_discount_target_is_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = SacConfig { gamma: 0.0, ..small_cfg() };
        let agent = SacAgent::new(12, &cfg, 1.0, &mut rng);
        let b = Batch::from_transitions(&[transition(-0.4, false)]);
        assert_eq!(agent.critic_targets(&b, &mut rng), vec![-0.4]);
    }

    #[test]
    fn critic_regresses_to_fixed_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = SacAgent::new(12, &small_cfg(), 1.0, &mut rng);
        let mut buf = ReplayBuffer::new(1);
        buf.push(transition(0.75, true));
        for _ in 0..2000 {
            let b = buf.sample(256, &mut rng);
            agent.critic_update(&b, &mut rng);
        }
        let sa = join_state_action(&[0.1; 12], &[0.2], 12);
        let q1 = agent.q1.predict(&sa, 1)[0];
        let q2 = agent.q2.predict(&sa, 1)[0];
        assert!((q1 - 0.75).abs() < 1e-3, "q1 {q1}");
        assert!((q2 - 0.75).abs() < 1e-3, "q2 {q2}");
    }

    #[test]
    fn target_critics_follow_polyak() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut agent = SacAgent::new(12, &small_cfg(), 1.0, &mut rng);
        let b = Batch::from_transitions(&[transition(1.0, false), transition(0.0, true)]);
        for _ in 0..3 {
            let prev = agent.q1_target.clone();
            agent.critic_update(&b, &mut rng);
            for ((t, o), p) in agent.q1_target.params().iter().zip(agent.q1.params()).zip(prev.params()) {
                for i in 0..t.len() {
                    assert_eq!(t[i], 0.005 * o[i] + (1.0 - 0.005) * p[i]);
                }
            }
        }
    }

    #[test]
    fn zero_critics_increase_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut agent = SacAgent::new(12, &small_cfg(), 1.0, &mut rng);
        for q in [&mut agent.q1, &mut agent.q2] {
            let last = q.layers_mut().last_mut().unwrap();
            last.w.fill(0.0);
            last.b.fill(0.0);
        }
        // Start narrow: the squashed distribution's entropy peaks near σ ≈ 0.9,
        // so a wide start would legitimately shrink.
        agent.policy.net.layers_mut().last_mut().unwrap().b[1] = -2.0;
        let b = Batch::from_transitions(&[transition(0.0, false); 32]);
        let std_of = |a: &SacAgent| a.policy.distribution(&[0.1; 12], 1).1[0];
        let before = std_of(&agent);
        for _ in 0..200 {
            agent.policy_update(&b, &mut rng);
        }
        assert!(std_of(&agent) > before + 0.05, "{} -> {}", before, std_of(&agent));
    }
}
