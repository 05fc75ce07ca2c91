//! The optimization core: implicit rewards, the score-weighted ranking
//! objective, its analytic gradient, exact per-sample influence, and the
//! inner training loop with plain-DPO and SFT baseline modes.
//!
//! With `f(x) = x`, the weighted rewards are `r_w* = s_w * r_w` and
//! `r_l* = (1 - s_l) * r_l`, and one pair's loss is
//! `-log sigmoid(r_w* - r_l*)`, evaluated as a stable softplus. Unit mode
//! drops the score weights and recovers the textbook objective exactly.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{FeatureVector, PolicyError, PolicyParams};
use crate::preference::{
    sample_pairs, PreferenceDataset, PreferenceError, PreferencePair, WeightConfig,
};

/// How implicit rewards are weighted inside the ranking objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardWeightMode {
    /// Score weighting: `(s_w * r_w, (1 - s_l) * r_l)`.
    Score,
    /// Plain DPO: rewards pass through unweighted.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub beta: f64,
    pub eta: f64,
    /// Pair samples drawn per inner epoch (the budget `S`).
    pub samples_per_iter: usize,
    pub batch_size: usize,
    pub reward_weight_mode: RewardWeightMode,
    pub weight_cfg: WeightConfig,
    pub seed: u64,
    pub max_epochs_inner: u32,
    /// Outer-loop stop: minimum validation solve-rate improvement.
    pub convergence_eps: f64,
    /// Refresh the frozen reference to the current parameters each outer
    /// iteration (the alternative keeps the iteration-1 reference).
    pub refresh_reference: bool,
    /// Optional inner early stop on a stalled moving-average loss.
    pub early_stop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 0.1,
            eta: 0.05,
            samples_per_iter: 2000,
            batch_size: 1,
            reward_weight_mode: RewardWeightMode::Score,
            weight_cfg: WeightConfig::power(3.0),
            seed: 0,
            max_epochs_inner: 1,
            convergence_eps: 0.005,
            refresh_reference: true,
            early_stop: false,
        }
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub mean_loss: f64,
    pub grad_norm: f64,
    /// Empirical share of sampled implicit rewards with `|r| <= 1`, the
    /// sufficient condition for the monotone-influence guarantee.
    pub fraction_r_in_unit_ball: f64,
    pub samples_seen: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("score {0} outside [0,1]")]
    ScoreDomain(f64),
    #[error("non-finite gradient at sample {sample}: {detail}")]
    NonFinite { sample: usize, detail: String },
    #[error("no winners to fit")]
    EmptyWinners,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `softplus(x) = ln(1 + e^x)` without overflow for large positive `x`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `r(x, y) = beta * log(pi(y|x) / pi_ref(y|x))`.
pub fn implicit_reward(
    params: &PolicyParams,
    reference: &PolicyParams,
    x: &FeatureVector,
    y: usize,
    beta: f64,
) -> Result<f64, PolicyError> {
    Ok(beta * (params.log_prob(x, y)? - reference.log_prob(x, y)?))
}

/// Apply the reward-weight mode to a pair's implicit rewards.
pub fn weighted_rewards(
    r_w: f64,
    r_l: f64,
    s_w: f64,
    s_l: f64,
    mode: RewardWeightMode,
) -> Result<(f64, f64), TrainError> {
    for s in [s_w, s_l] {
        if !(0.0..=1.0).contains(&s) {
            return Err(TrainError::ScoreDomain(s));
        }
    }
    Ok(match mode {
        RewardWeightMode::Unit => (r_w, r_l),
        RewardWeightMode::Score => (s_w * r_w, (1.0 - s_l) * r_l),
    })
}

fn pair_rewards(
    pair: &PreferencePair,
    params: &PolicyParams,
    reference: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<(f64, f64), TrainError> {
    let r_w = implicit_reward(params, reference, &pair.features, pair.winner_index, cfg.beta)?;
    let r_l = implicit_reward(params, reference, &pair.features, pair.loser_index, cfg.beta)?;
    Ok((r_w, r_l))
}

/// `-log sigmoid(r_w* - r_l*)` for one pair.
pub fn pair_loss(
    pair: &PreferencePair,
    params: &PolicyParams,
    reference: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    let (r_w, r_l) = pair_rewards(pair, params, reference, cfg)?;
    let (r_w_star, r_l_star) =
        weighted_rewards(r_w, r_l, pair.s_w, pair.s_l, cfg.reward_weight_mode)?;
    Ok(softplus(r_l_star - r_w_star))
}

/// Analytic gradient of [`pair_loss`] with respect to the policy weights.
///
/// The loss differentiates to
/// `-sigmoid(r_l* - r_w*) * beta * (f(s_w) grad log pi(y_w) - (1 - f(s_l)) grad log pi(y_l))`
/// in score mode; unit mode replaces both score factors with 1.
pub fn pair_loss_grad(
    pair: &PreferencePair,
    params: &PolicyParams,
    reference: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    let (r_w, r_l) = pair_rewards(pair, params, reference, cfg)?;
    let (r_w_star, r_l_star) =
        weighted_rewards(r_w, r_l, pair.s_w, pair.s_l, cfg.reward_weight_mode)?;
    let coeff = -sigmoid(r_l_star - r_w_star) * cfg.beta;
    let (w_scale, l_scale) = match cfg.reward_weight_mode {
        RewardWeightMode::Unit => (1.0, 1.0),
        RewardWeightMode::Score => (pair.s_w, 1.0 - pair.s_l),
    };
    let grad_w = params.grad_log_prob(&pair.features, pair.winner_index)?;
    let grad_l = params.grad_log_prob(&pair.features, pair.loser_index)?;
    Ok(grad_w
        .iter()
        .zip(&grad_l)
        .map(|(gw, gl)| coeff * (w_scale * gw - l_scale * gl))
        .collect())
}

/// Identity of one scored sample `z = (task, workflow, score)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRef {
    pub task_id: String,
    pub bank_index: usize,
    pub score: f64,
}

/// Exact per-sample influence by full enumeration over the dataset:
/// the uniform expectation of
/// `d(s_w, s_l) * sigmoid(r_l* - r_w*) * (f(s_w) 1[w=z] - (1 - f(s_l)) 1[l=z])`.
///
/// Positive influence means optimization pushes the sample's logits up.
pub fn influence(
    z: &SampleRef,
    ds: &PreferenceDataset,
    params: &PolicyParams,
    reference: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    if ds.is_empty() {
        return Err(TrainError::Preference(PreferenceError::EmptyDataset));
    }
    let mut total = 0.0;
    for pair in &ds.pairs {
        let is_winner =
            pair.task_id == z.task_id && pair.winner_index == z.bank_index && pair.s_w == z.score;
        let is_loser =
            pair.task_id == z.task_id && pair.loser_index == z.bank_index && pair.s_l == z.score;
        if !is_winner && !is_loser {
            continue;
        }
        let weight = cfg.weight_cfg.weight(pair.s_w, pair.s_l)?;
        let (r_w, r_l) = pair_rewards(pair, params, reference, cfg)?;
        let (r_w_star, r_l_star) =
            weighted_rewards(r_w, r_l, pair.s_w, pair.s_l, cfg.reward_weight_mode)?;
        let sig = sigmoid(r_l_star - r_w_star);
        if is_winner {
            total += weight * sig * pair.s_w;
        }
        if is_loser {
            total -= weight * sig * (1.0 - pair.s_l);
        }
    }
    Ok(total / ds.len() as f64)
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One inner optimization run: draw the sample budget from the gap-weighted
/// distribution and descend the pair loss in mini-batches. Returns the final
/// parameters and one statistics row per epoch.
pub fn train_inner(
    params: &PolicyParams,
    reference: &PolicyParams,
    ds: &PreferenceDataset,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(PolicyParams, Vec<TrainStats>), TrainError> {
    let mut theta = params.clone();
    let mut epochs = Vec::new();
    let batch_size = cfg.batch_size.max(1);
    for _epoch in 0..cfg.max_epochs_inner {
        let draws = sample_pairs(ds, &cfg.weight_cfg, rng, cfg.samples_per_iter)?;
        let mut loss_sum = 0.0;
        let mut grad_norm_sum = 0.0;
        let mut steps = 0usize;
        let mut rewards_seen = 0usize;
        let mut rewards_in_ball = 0usize;
        let mut seen = 0usize;
        let mut recent: Vec<f64> = Vec::new();
        let mut previous_window: Option<f64> = None;
        let mut stop = false;
        for batch in draws.chunks(batch_size) {
            let mut grad_acc = vec![0.0; theta.weights.len()];
            for &pair_idx in batch {
                let pair = &ds.pairs[pair_idx];
                let loss = pair_loss(pair, &theta, reference, cfg)?;
                loss_sum += loss;
                let (r_w, r_l) = pair_rewards(pair, &theta, reference, cfg)?;
                rewards_seen += 2;
                rewards_in_ball += usize::from(r_w.abs() <= 1.0);
                rewards_in_ball += usize::from(r_l.abs() <= 1.0);
                let grad = pair_loss_grad(pair, &theta, reference, cfg)?;
                for (acc, g) in grad_acc.iter_mut().zip(&grad) {
                    *acc += g;
                }
                seen += 1;
                if cfg.early_stop {
                    recent.push(loss);
                    if recent.len() == 200 {
                        let window: f64 = recent.iter().sum::<f64>() / recent.len() as f64;
                        if let Some(prev) = previous_window {
                            if prev - window < 1e-4 {
                                stop = true;
                            }
                        }
                        previous_window = Some(window);
                        recent.clear();
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grad_acc.iter_mut() {
                *g *= scale;
            }
            if let Some(bad) = grad_acc.iter().position(|g| !g.is_finite()) {
                return Err(TrainError::NonFinite {
                    sample: seen,
                    detail: format!("gradient entry {bad} is {}", grad_acc[bad]),
                });
            }
            grad_norm_sum += l2_norm(&grad_acc);
            steps += 1;
            for (w, g) in theta.weights.iter_mut().zip(&grad_acc) {
                *w -= cfg.eta * g;
            }
            if stop {
                break;
            }
        }
        epochs.push(TrainStats {
            mean_loss: if seen > 0 { loss_sum / seen as f64 } else { 0.0 },
            grad_norm: if steps > 0 { grad_norm_sum / steps as f64 } else { 0.0 },
            fraction_r_in_unit_ball: if rewards_seen > 0 {
                rewards_in_ball as f64 / rewards_seen as f64
            } else {
                0.0
            },
            samples_seen: seen,
        });
        if stop {
            break;
        }
    }
    Ok((theta, epochs))
}

/// A preferred example for the SFT baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct WinnerExample {
    pub features: FeatureVector,
    pub bank_index: usize,
    pub score: f64,
}

/// SFT baseline: ascend mean log-probability of preferred workflows, sampled
/// proportionally to their scores (uniform when all scores are equal).
pub fn sft_update(
    params: &PolicyParams,
    winners: &[WinnerExample],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyParams, TrainError> {
    if winners.is_empty() {
        return Err(TrainError::EmptyWinners);
    }
    let total: f64 = winners.iter().map(|w| w.score).sum();
    let weights: Vec<f64> = if total > 0.0 {
        winners.iter().map(|w| w.score / total).collect()
    } else {
        vec![1.0 / winners.len() as f64; winners.len()]
    };
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut theta = params.clone();
    let batch_size = cfg.batch_size.max(1);
    let draws: Vec<usize> = (0..cfg.samples_per_iter)
        .map(|_| {
            let roll: f64 = rand::Rng::gen(rng);
            cumulative.partition_point(|c| *c <= roll).min(winners.len() - 1)
        })
        .collect();
    for batch in draws.chunks(batch_size) {
        let mut grad_acc = vec![0.0; theta.weights.len()];
        for &idx in batch {
            let winner = &winners[idx];
            let grad = theta.grad_log_prob(&winner.features, winner.bank_index)?;
            for (acc, g) in grad_acc.iter_mut().zip(&grad) {
                *acc += g;
            }
        }
        let scale = cfg.eta / batch.len() as f64;
        for (w, g) in theta.weights.iter_mut().zip(&grad_acc) {
            *w += scale * g;
        }
    }
    Ok(theta)
}
