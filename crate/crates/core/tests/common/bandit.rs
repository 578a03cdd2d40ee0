use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srlab::sac::{ReplayBuffer, SacAgent, SacConfig, Transition};

#[allow(dead_code)]
pub struct BanditOutcome {
    /// Deterministic α after each evaluation checkpoint `(step, α)`.
    pub checkpoints: Vec<(usize, f64)>,
    pub final_alpha: f64,
    /// Mean of the per-update batch `−log π` over the last 500 updates.
    pub final_entropy: f64,
    /// Reward of every training step, in order.
    pub rewards: Vec<f64>,
}

/// One-step bandit: state ≡ 0, α = (a + 1)/2, reward −(α − 0.7)².
pub fn train_bandit(seed: u64, steps: usize, hidden: Vec<usize>) -> BanditOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SacConfig { hidden, warmup_steps: 256, init_beta: 0.05, ..SacConfig::default() };
    let mut agent = SacAgent::new(12, &cfg, 1.0, &mut rng);
    let mut buf = ReplayBuffer::new(cfg.buffer_capacity);
    let zero = [0.0; 12];
    let mut checkpoints = Vec::new();
    let mut entropies = Vec::new();
    let mut rewards = Vec::with_capacity(steps);
    for step in 0..steps {
        let a = if step < cfg.warmup_steps { rng.gen_range(-1.0..1.0) } else { agent.act(&zero, false, &mut rng) };
        let alpha = (a + 1.0) / 2.0;
        let r = -(alpha - 0.7) * (alpha - 0.7);
        rewards.push(r);
        buf.push(Transition { s: zero, a, r, s2: zero, done: true });
        if step + 1 >= cfg.warmup_steps {
            let b = buf.sample(cfg.batch_size, &mut rng);
            agent.critic_update(&b, &mut rng);
            entropies.push(agent.policy_update(&b, &mut rng).entropy);
        }
        if (step + 1) % 500 == 0 {
            checkpoints.push((step + 1, (agent.act(&zero, true, &mut rng) + 1.0) / 2.0));
        }
    }
    let final_alpha = (agent.act(&zero, true, &mut rng) + 1.0) / 2.0;
    let tail = &entropies[entropies.len().saturating_sub(500)..];
    let final_entropy = tail.iter().sum::<f64>() / tail.len() as f64;
    BanditOutcome { checkpoints, final_alpha, final_entropy, rewards }
}
