//! Supervised fine-tuning loss for the tabular policy.
//!
//! The loss is mean per-example negative log-likelihood; its gradient with
//! respect to a logit row is `(softmax − onehot) / batch`, accumulated over
//! the positions that touch the row.

use crate::num::Scalar;

use super::{ToyPolicy, TrainError};

/// One supervised example: the target token sequence for a context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedExample {
    pub context: usize,
    pub tokens: Vec<usize>,
}

/// Mean negative log-likelihood of the batch:
/// `(1/B) Σ_b Σ_t −log p(y_t | context_b, t)`.
pub fn sft_loss<S: Scalar>(
    policy: &ToyPolicy<S>,
    batch: &[TokenizedExample],
) -> Result<S, TrainError> {
    Ok(sft_loss_and_grad(policy, batch)?.0)
}

/// Loss plus its dense gradient over `policy.params()`.
pub fn sft_loss_and_grad<S: Scalar>(
    policy: &ToyPolicy<S>,
    batch: &[TokenizedExample],
) -> Result<(S, Vec<S>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let scale = S::one() / S::from_f64_lossy(batch.len() as f64);
    let vocab = policy.vocab();
    let mut loss = S::zero();
    let mut grad = vec![S::zero(); policy.params().len()];
    for example in batch {
        if example.tokens.is_empty() {
            return Err(TrainError::EmptyResponse);
        }
        // Validation happens once per example inside token_log_probs.
        let log_probs = policy.token_log_probs(example.context, &example.tokens)?;
        for (position, (&token, lp)) in example.tokens.iter().zip(&log_probs).enumerate() {
            loss -= *lp * scale;
            let probs = policy.softmax_row(example.context, position);
            let start = (example.context * policy.max_len() + position) * vocab;
            for (v, p) in probs.into_iter().enumerate() {
                let indicator = if v == token { S::one() } else { S::zero() };
                grad[start + v] += (p - indicator) * scale;
            }
        }
    }
    Ok((loss, grad))
}
