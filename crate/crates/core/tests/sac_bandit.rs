mod common {
    pub mod bandit;
}

use common::bandit::train_bandit;

#[test]
fn bandit_converges_to_optimal_action() {
    let out = train_bandit(1, 5000, vec![64, 64]);
    assert!((out.final_alpha - 0.7).abs() <= 0.05, "α = {}", out.final_alpha);
}

#[test]
fn temperature_tuning_reaches_target_entropy() {
    let out = train_bandit(2, 10_000, vec![64, 64]);
    assert!((out.final_alpha - 0.7).abs() <= 0.05, "α = {}", out.final_alpha);
    assert!((out.final_entropy - (-1.0)).abs() <= 0.5, "entropy {}", out.final_entropy);
}
