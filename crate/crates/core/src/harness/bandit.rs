use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ranker::ObjectiveModel;
use crate::rng::{stream, Purpose};
use crate::Result;

/// A stationary environment: arm `k` pays `means[k]` plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryBandit {
    pub means: Vec<f64>,
    pub noise_sd: f64,
}

impl Default for StationaryBandit {
    fn default() -> Self {
        StationaryBandit { means: vec![1.0, 1.25, 1.5], noise_sd: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    pub choices: Vec<usize>,
    pub best: usize,
}

impl BanditRun {
    /// Share of the last `window` rounds that picked the best arm.
    pub fn best_rate(&self, window: usize) -> f64 {
        let tail = &self.choices[self.choices.len().saturating_sub(window)..];
        tail.iter().filter(|&&c| c == self.best).count() as f64 / tail.len().max(1) as f64
    }
}

/// Thompson sampling over one-hot template features with a conjugate
/// linear model updated after every round.
pub fn run_stationary_bandit(env: &StationaryBandit, rounds: usize, seed: u64) -> Result<BanditRun> {
    let k = env.means.len();
    let schema: Vec<String> = (0..k).map(|i| format!("template_{i}")).collect();
    let mut model = ObjectiveModel::linear(schema, env.noise_sd * env.noise_sd);
    let mut rng = stream(seed, Purpose::Custom(0xBA4D17), 0);
    let mut choices = Vec::with_capacity(rounds);
    let one_hot = |i: usize| -> Vec<f64> { (0..k).map(|j| f64::from(u8::from(i == j))).collect() };
    for _ in 0..rounds {
        let snapshot = model.snapshot()?;
        let mut best = (f64::NEG_INFINITY, 0);
        for arm in 0..k {
            let draw = snapshot.sample_prediction(&one_hot(arm), &mut rng)?;
            if draw > best.0 {
                best = (draw, arm);
            }
        }
        let chosen = best.1;
        let reward = env.means[chosen] + env.noise_sd * rng.sample::<f64, _>(StandardNormal);
        model.blr_update(&one_hot(chosen), reward)?;
        choices.push(chosen);
    }
    let best = (0..k).max_by(|&a, &b| env.means[a].total_cmp(&env.means[b])).unwrap_or(0);
    Ok(BanditRun { choices, best })
}
