//! Composite rule-based reward: format check, constraint satisfaction,
//! reflection check.
//!
//! A response that fails the format check (bad envelope or unparseable plan
//! JSON) scores −1 outright. Otherwise the reward is the sum of the
//! commonsense micro ratio, the hard micro ratio, and ±0.5 for the presence
//! or absence of a trailing reflection — a total in [−0.5, 2.5].

use serde::{Deserialize, Serialize};

use crate::eval::{evaluate_plan, EvalOptions};
use crate::plan::parse_envelope;
use crate::query_gen::Query;
use crate::sandbox::Sandbox;

/// Literal that must appear in the trailing region of the think text for the
/// reflection bonus.
pub const REFLECTION_TOKEN: &str = "REFLECTION";

/// Fraction of the think text (by characters) that must precede the last
/// reflection marker: the marker has to sit in the final 40%.
const REFLECTION_TAIL_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format_ok: bool,
    pub commonsense_reward: f64,
    pub hard_reward: f64,
    pub reflection_reward: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn format_failure() -> Self {
        RewardBreakdown {
            format_ok: false,
            commonsense_reward: 0.0,
            hard_reward: 0.0,
            reflection_reward: -0.5,
            total: -1.0,
        }
    }
}

pub fn compute_reward(sandbox: &Sandbox, query: &Query, response_text: &str) -> RewardBreakdown {
    compute_reward_with(sandbox, query, response_text, EvalOptions::default())
}

pub fn compute_reward_with(
    sandbox: &Sandbox,
    query: &Query,
    response_text: &str,
    options: EvalOptions,
) -> RewardBreakdown {
    let Ok(envelope) = parse_envelope(response_text) else {
        return RewardBreakdown::format_failure();
    };
    let Some(plan) = &envelope.plan else {
        return RewardBreakdown::format_failure();
    };
    let report = evaluate_plan(sandbox, query, plan, options);
    let reflection_reward = if detect_reflection(&envelope.think) {
        0.5
    } else {
        -0.5
    };
    RewardBreakdown {
        format_ok: true,
        commonsense_reward: report.commonsense_micro,
        hard_reward: report.hard_micro,
        reflection_reward,
        total: report.commonsense_micro + report.hard_micro + reflection_reward,
    }
}

/// True iff the reflection marker occurs and its last occurrence starts in
/// the final 40% of the think text (by character position).
pub fn detect_reflection(think: &str) -> bool {
    let Some(byte_idx) = think.rfind(REFLECTION_TOKEN) else {
        return false;
    };
    let chars_before = think[..byte_idx].chars().count();
    let total_chars = think.chars().count();
    chars_before as f64 >= (1.0 - REFLECTION_TAIL_FRACTION) * total_chars as f64
}
