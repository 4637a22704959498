//! Self-contained policy-optimization demo on the toy environment.
//!
//! Each step samples one group of responses for a round-robin context with
//! the current policy as its own sampling policy (importance weights start at
//! one), takes one ascent step, and logs the group's mean reward, the
//! post-step surrogate and the gradient norm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::num::Scalar;

use super::{
    grpo_objective, grpo_objective_and_grad, GroupResponse, GroupSample, GrpoConfig, ToyPlanEnv,
    ToyPolicy, TrainError,
};

const CONTEXTS: usize = 4;
const SLOTS: usize = 3;
const VOCAB: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemoLogRow<S> {
    pub step: usize,
    pub context: usize,
    pub mean_reward: S,
    /// Surrogate objective after the step, against the step's sampling
    /// distribution; zero when nothing was learned.
    pub objective: S,
    pub grad_norm: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport<S> {
    pub rows: Vec<DemoLogRow<S>>,
    pub policy: ToyPolicy<S>,
}

impl<S: Scalar> DemoReport<S> {
    fn mean_over<'a>(rows: impl Iterator<Item = &'a DemoLogRow<S>>) -> S
    where
        S: 'a,
    {
        let mut total = S::zero();
        let mut count = 0usize;
        for row in rows {
            total += row.mean_reward;
            count += 1;
        }
        if count == 0 {
            S::zero()
        } else {
            total / S::from_f64_lossy(count as f64)
        }
    }

    /// Mean group reward over the first `n` logged steps.
    pub fn head_mean_reward(&self, n: usize) -> S {
        Self::mean_over(self.rows.iter().take(n))
    }

    /// Mean group reward over the last `n` logged steps.
    pub fn tail_mean_reward(&self, n: usize) -> S {
        Self::mean_over(self.rows.iter().rev().take(n))
    }
}

pub fn grpo_train_demo<S: Scalar>(
    steps: usize,
    config: &GrpoConfig<S>,
) -> Result<DemoReport<S>, TrainError> {
    let env = ToyPlanEnv::new(CONTEXTS, SLOTS, VOCAB, config.seed);
    let mut policy = ToyPolicy::new(CONTEXTS, SLOTS, VOCAB);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::with_capacity(steps);

    for step in 0..steps {
        let context = step % CONTEXTS;
        let mut responses = Vec::with_capacity(config.group_size);
        for _ in 0..config.group_size {
            let tokens = policy.sample(context, SLOTS, &mut rng);
            let reward = S::from_f64_lossy(env.reward(context, &tokens));
            let old_log_probs = policy.token_log_probs(context, &tokens)?;
            responses.push(GroupResponse {
                tokens,
                reward,
                old_log_probs,
            });
        }
        let mean_reward = responses
            .iter()
            .fold(S::zero(), |acc, r| acc + r.reward)
            / S::from_f64_lossy(responses.len() as f64);
        let groups = [GroupSample { context, responses }];

        let (_, grad) = grpo_objective_and_grad(&policy, &groups, config)?;
        let mut norm_sq = S::zero();
        for g in &grad {
            norm_sq += *g * *g;
        }
        let grad_norm = norm_sq.sqrt();
        if !grad_norm.is_finite() {
            break;
        }
        for (p, g) in policy.params_mut().iter_mut().zip(&grad) {
            *p += config.learning_rate * *g;
        }
        let objective = grpo_objective(&policy, &groups, config)?;
        if !objective.is_finite() {
            // Roll back the poisoned step and keep the last good policy.
            for (p, g) in policy.params_mut().iter_mut().zip(&grad) {
                *p -= config.learning_rate * *g;
            }
            break;
        }
        rows.push(DemoLogRow {
            step,
            context,
            mean_reward,
            objective,
            grad_norm,
        });
    }
    Ok(DemoReport { rows, policy })
}
