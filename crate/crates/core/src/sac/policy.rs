//! Tanh-squashed Gaussian policy over a one-dimensional action.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, MlpCache};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside `log(1 − tanh²(z) + ε)`.
pub const TANH_EPS: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Policy network: a trunk ending in a two-unit layer whose outputs are the
/// mean head and the log-std head.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
}

/// Everything the actor gradient needs from a batched sampling pass.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub cache: MlpCache,
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether the raw log-std was inside the clamp (gradient passes).
    pub log_std_live: Vec<bool>,
    pub eps: Vec<f64>,
    pub z: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        Self { net: Mlp::new(&sizes, rng) }
    }

    pub fn state_dim(&self) -> usize {
        self.net.n_in()
    }

    /// Mean and clamped log-std for each state in the batch.
    pub fn distribution(&self, states: &[f64], batch: usize) -> (Vec<f64>, Vec<f64>) {
        let out = self.net.predict(states, batch);
        let mean = out.iter().step_by(2).copied().collect();
        let log_std = out.iter().skip(1).step_by(2).map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        (mean, log_std)
    }

    /// `tanh(mean)`, the deterministic action.
    pub fn deterministic_action(&self, state: &[f64]) -> f64 {
        let (mean, _) = self.distribution(state, 1);
        mean[0].tanh()
    }

    /// Reparameterized samples with their log-densities.
    pub fn sample_batch<R: Rng + ?Sized>(&self, states: &[f64], batch: usize, rng: &mut R) -> PolicySample {
        let eps: Vec<f64> = (0..batch).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with_noise(states, batch, eps)
    }

    /// Same as [`Self::sample_batch`] with caller-supplied standard normal draws.
    pub fn sample_with_noise(&self, states: &[f64], batch: usize, eps: Vec<f64>) -> PolicySample {
        assert_eq!(eps.len(), batch);
        let (out, cache) = self.net.forward(states, batch);
        let mut mean = Vec::with_capacity(batch);
        let mut log_std = Vec::with_capacity(batch);
        let mut live = Vec::with_capacity(batch);
        let mut z = Vec::with_capacity(batch);
        let mut action = Vec::with_capacity(batch);
        let mut log_prob = Vec::with_capacity(batch);
        for i in 0..batch {
            let mu = out[2 * i];
            let raw = out[2 * i + 1];
            let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let zi = mu + ls.exp() * eps[i];
            let a = zi.tanh();
            mean.push(mu);
            log_std.push(ls);
            live.push((LOG_STD_MIN..=LOG_STD_MAX).contains(&raw));
            z.push(zi);
            action.push(a);
            log_prob.push(squashed_log_prob(eps[i], ls, a));
        }
        PolicySample { cache, mean, log_std, log_std_live: live, eps, z, action, log_prob }
    }

    /// A single stochastic action and its log-density.
    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> (f64, f64) {
        let s = self.sample_batch(state, 1, rng);
        (s.action[0], s.log_prob[0])
    }
}

/// Log-density of `a = tanh(μ + σε)`:
/// `log N(ε; 0, 1) − log σ − log(1 − a² + ε_tanh)`.
#[inline]
pub fn squashed_log_prob(eps: f64, log_std: f64, action: f64) -> f64 {
    -0.5 * eps * eps - log_std - HALF_LN_2PI - (1.0 - action * action + TANH_EPS).ln()
}

/// `∂ log π / ∂z` through the squashing correction, holding ε fixed.
#[inline]
pub fn d_log_prob_dz(action: f64) -> f64 {
    let one_minus = 1.0 - action * action;
    2.0 * action * one_minus / (one_minus + TANH_EPS)
}
