//! Desk-scale training core: a tabular softmax policy, the supervised loss,
//! and the clipped group-relative policy-gradient objective, with closed-form
//! gradients the tests verify against central finite differences.
//!
//! Everything here is generic over [`crate::Scalar`]; `f32`/`f64` aliases
//! live at the crate root.

mod demo;
mod env;
mod grpo;
mod policy;
mod sft;

pub use demo::{grpo_train_demo, DemoLogRow, DemoReport};
pub use env::ToyPlanEnv;
pub use grpo::{
    compute_advantages, grpo_objective, grpo_objective_and_grad, grpo_step, GroupResponse,
    GroupSample, GrpoConfig, GrpoStepStats, TokenPooling,
};
pub use policy::ToyPolicy;
pub use sft::{sft_loss, sft_loss_and_grad, TokenizedExample};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("token {token} outside vocabulary of size {vocab}")]
    UnknownToken { token: usize, vocab: usize },
    #[error("sequence length {len} exceeds policy maximum {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
    #[error("context {context} outside table of size {contexts}")]
    UnknownContext { context: usize, contexts: usize },
    #[error("batch contains no examples")]
    EmptyBatch,
    #[error("response has no tokens")]
    EmptyResponse,
    #[error("{found} stored log-probs for {expected} tokens")]
    MismatchedOldLogProbs { expected: usize, found: usize },
}
