//! Clipped group-relative policy optimization on the tabular policy.
//!
//! Rewards inside a group are normalized to advantages (mean zero, unit
//! population standard deviation, zeros when the spread collapses). The
//! objective averages clipped importance-weighted advantage terms over
//! groups, responses and tokens; its gradient flows only through terms the
//! clip has not cut off.

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

use super::{ToyPolicy, TrainError};

/// How token terms are pooled inside one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenPooling {
    /// Mean over tokens per response, then mean over the group.
    SequenceMean,
    /// One global mean over every token term in the group.
    TokenPooled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrpoConfig<S> {
    /// Responses drawn per prompt during rollout.
    pub group_size: usize,
    /// Importance-weight clip radius ε.
    pub clip: S,
    pub learning_rate: S,
    /// Reward spreads at or below this are treated as degenerate.
    pub std_floor: S,
    pub seed: u64,
    pub token_pooling: TokenPooling,
}

impl<S: Scalar> Default for GrpoConfig<S> {
    fn default() -> Self {
        GrpoConfig {
            group_size: 8,
            clip: S::from_f64_lossy(0.2),
            learning_rate: S::from_f64_lossy(0.8),
            std_floor: S::from_f64_lossy(1e-6),
            seed: 0,
            token_pooling: TokenPooling::SequenceMean,
        }
    }
}

/// One sampled response with its reward and sampling-time log-probs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupResponse<S> {
    pub tokens: Vec<usize>,
    pub reward: S,
    pub old_log_probs: Vec<S>,
}

/// All responses drawn for one prompt context.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample<S> {
    pub context: usize,
    pub responses: Vec<GroupResponse<S>>,
}

/// Group-normalized advantages: `(r − mean) / std` with the population
/// standard deviation, or all zeros when `std ≤ std_floor`.
pub fn compute_advantages<S: Scalar>(rewards: &[S], std_floor: S) -> Vec<S> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = S::from_f64_lossy(rewards.len() as f64);
    let mean = rewards.iter().fold(S::zero(), |acc, &r| acc + r) / n;
    let var = rewards
        .iter()
        .fold(S::zero(), |acc, &r| acc + (r - mean) * (r - mean))
        / n;
    let std = var.sqrt();
    if std <= std_floor {
        return vec![S::zero(); rewards.len()];
    }
    rewards.iter().map(|&r| (r - mean) / std).collect()
}

pub fn grpo_objective<S: Scalar>(
    policy: &ToyPolicy<S>,
    groups: &[GroupSample<S>],
    config: &GrpoConfig<S>,
) -> Result<S, TrainError> {
    Ok(grpo_objective_and_grad(policy, groups, config)?.0)
}

/// Objective plus its dense gradient over `policy.params()`.
pub fn grpo_objective_and_grad<S: Scalar>(
    policy: &ToyPolicy<S>,
    groups: &[GroupSample<S>],
    config: &GrpoConfig<S>,
) -> Result<(S, Vec<S>), TrainError> {
    if groups.is_empty() || groups.iter().any(|g| g.responses.is_empty()) {
        return Err(TrainError::EmptyBatch);
    }
    let one = S::one();
    let low = one - config.clip;
    let high = one + config.clip;
    let group_scale = S::one() / S::from_f64_lossy(groups.len() as f64);
    let mut objective = S::zero();
    let mut grad = vec![S::zero(); policy.params().len()];

    for group in groups {
        let rewards: Vec<S> = group.responses.iter().map(|r| r.reward).collect();
        let advantages = compute_advantages(&rewards, config.std_floor);
        let group_len = S::from_f64_lossy(group.responses.len() as f64);
        let total_tokens: usize = group.responses.iter().map(|r| r.tokens.len()).sum();

        for (response, &advantage) in group.responses.iter().zip(&advantages) {
            if response.tokens.is_empty() {
                return Err(TrainError::EmptyResponse);
            }
            if response.old_log_probs.len() != response.tokens.len() {
                return Err(TrainError::MismatchedOldLogProbs {
                    expected: response.tokens.len(),
                    found: response.old_log_probs.len(),
                });
            }
            let new_log_probs = policy.token_log_probs(group.context, &response.tokens)?;
            let scale = group_scale
                * match config.token_pooling {
                    TokenPooling::SequenceMean => {
                        one / (group_len * S::from_f64_lossy(response.tokens.len() as f64))
                    }
                    TokenPooling::TokenPooled => one / S::from_f64_lossy(total_tokens as f64),
                };

            for (position, ((&token, &new_lp), &old_lp)) in response
                .tokens
                .iter()
                .zip(&new_log_probs)
                .zip(&response.old_log_probs)
                .enumerate()
            {
                let weight = (new_lp - old_lp).exp();
                let unclipped = weight * advantage;
                let clipped = weight.min(high).max(low) * advantage;
                objective += unclipped.min(clipped) * scale;
                // The min selects the unclipped branch (or a tie); only then
                // does the weight carry gradient.
                if unclipped <= clipped {
                    let probs = policy.softmax_row(group.context, position);
                    let start = (group.context * policy.max_len() + position) * policy.vocab();
                    let coeff = advantage * weight * scale;
                    for (v, p) in probs.into_iter().enumerate() {
                        let indicator = if v == token { one } else { S::zero() };
                        grad[start + v] += coeff * (indicator - p);
                    }
                }
            }
        }
    }
    Ok((objective, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrpoStepStats<S> {
    pub objective: S,
    pub grad_norm: S,
}

/// One ascent step in place; returns the pre-step objective and the gradient
/// norm.
pub fn grpo_step<S: Scalar>(
    policy: &mut ToyPolicy<S>,
    groups: &[GroupSample<S>],
    config: &GrpoConfig<S>,
) -> Result<GrpoStepStats<S>, TrainError> {
    let (objective, grad) = grpo_objective_and_grad(policy, groups, config)?;
    let mut norm_sq = S::zero();
    for g in &grad {
        norm_sq += *g * *g;
    }
    for (p, g) in policy.params_mut().iter_mut().zip(&grad) {
        *p += config.learning_rate * *g;
    }
    Ok(GrpoStepStats {
        objective,
        grad_norm: norm_sq.sqrt(),
    })
}
