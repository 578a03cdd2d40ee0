use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use srlab::sac::{GaussianPolicy, Mlp, SacAgent, SacConfig};

fn close(analytic: f64, numeric: f64, rel: f64) -> bool {
    (analytic - numeric).abs() <= rel * analytic.abs().max(numeric.abs()) + 1e-9
}

/// Perturbs parameter `(tensor, index)` of `net` and evaluates `f`.
fn central_difference(net: &mut Mlp, tensor: usize, index: usize, h: f64, f: &dyn Fn(&Mlp) -> f64) -> f64 {
    let orig = net.params()[tensor][index];
    net.params_mut()[tensor][index] = orig + h;
    let up = f(net);
    net.params_mut()[tensor][index] = orig - h;
    let down = f(net);
    net.params_mut()[tensor][index] = orig;
    (up - down) / (2.0 * h)
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..10 {
        let n_in = rng.gen_range(1..5);
        let sizes = [n_in, rng.gen_range(2..7), rng.gen_range(2..7), rng.gen_range(1..3)];
        let mut net = Mlp::new(&sizes, &mut rng);
        let batch = 3;
        let x: Vec<f64> = (0..batch * n_in).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..batch * sizes[3]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |n: &Mlp| n.predict(&x, batch).iter().zip(&c).map(|(o, c)| o * c).sum::<f64>();
        let (_, cache) = net.forward(&x, batch);
        let (grads, _) = net.backward(&cache, &c);
        let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
        for (t, g) in analytic.iter().enumerate() {
            for (i, &gi) in g.iter().enumerate() {
                let fd = central_difference(&mut net, t, i, 1e-5, &loss);
                assert!(close(gi, fd, 1e-4), "net {trial} tensor {t} index {i}: {gi} vs {fd}");
            }
        }
    }
}

#[test]
fn mlp_input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Mlp::new(&[3, 5, 4, 1], &mut rng);
    let x = vec![0.3, -0.7, 1.1];
    let (_, cache) = net.forward(&x, 1);
    let (_, dx) = net.backward(&cache, &[1.0]);
    for i in 0..3 {
        let mut up = x.clone();
        let mut down = x.clone();
        up[i] += 1e-5;
        down[i] -= 1e-5;
        let fd = (net.predict(&up, 1)[0] - net.predict(&down, 1)[0]) / 2e-5;
        assert!(close(dx[i], fd, 1e-4), "input {i}: {} vs {fd}", dx[i]);
    }
}

#[test]
fn actor_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cfg = SacConfig { hidden: vec![4], init_beta: 0.3, ..SacConfig::default() };
    for _ in 0..5 {
        let mut agent = SacAgent::new(1, &cfg, 1.0, &mut rng);
        let batch = 6;
        let states: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps: Vec<f64> = (0..batch).map(|_| rng.sample(StandardNormal)).collect();
        let (_, grads, _) = agent.actor_loss_and_grad(&states, batch, eps.clone());
        let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
        let critics = agent.clone();
        let loss = |net: &Mlp| {
            let mut a = critics.clone();
            a.policy.net = net.clone();
            a.actor_loss_and_grad(&states, batch, eps.clone()).0
        };
        let mut net = agent.policy.net.clone();
        for (t, g) in analytic.iter().enumerate() {
            for (i, &gi) in g.iter().enumerate() {
                let fd = central_difference(&mut net, t, i, 1e-6, &loss);
                assert!(close(gi, fd, 1e-3), "tensor {t} index {i}: {gi} vs {fd}");
            }
        }
        agent.policy.net = net;
    }
}

/// Entropy of `tanh(N(μ, σ²))` by quadrature over the action density
/// `p(a) = N(atanh a; μ, σ) / (1 − a²)`.
fn squashed_entropy(mu: f64, sigma: f64) -> f64 {
    let n = 400_000;
    let lo = -1.0 + 1e-12;
    let hi = 1.0 - 1e-12;
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let a: f64 = lo + (k as f64 + 0.5) * h;
        let z = a.atanh();
        let pz = (-0.5 * ((z - mu) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let pa = pz / (1.0 - a * a);
        if pa > 0.0 {
            acc -= pa * pa.ln() * h;
        }
    }
    acc
}

#[test]
fn monte_carlo_log_prob_matches_quadrature_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (mu, log_std) in [(0.2, 0.0), (0.6, -0.3), (0.0, -2.5)] {
        let mut p = GaussianPolicy::new(1, &[4], &mut rng);
        for l in p.net.layers_mut() {
            l.w.fill(0.0);
        }
        p.net.layers_mut()[1].b = vec![mu, log_std];
        let n = 100_000;
        let s = p.sample_batch(&vec![0.0; n], n, &mut rng);
        let mc = -s.log_prob.iter().sum::<f64>() / n as f64;
        let exact = squashed_entropy(mu, f64::exp(log_std));
        assert!((mc - exact).abs() <= 0.02 * exact.abs(), "μ={mu} logσ={log_std}: {mc} vs {exact}");
    }
}
