//! Travel-planning agent pipeline: a deterministic sandbox of cities,
//! transport, restaurants, attractions and accommodations; synthetic query
//! generation with strict deduplication; a day-by-day plan model; the
//! commonsense/hard constraint evaluator with micro/macro aggregation; the
//! composite rule-based reward; a reasoner/judge/reflector orchestrator that
//! emits supervised fine-tuning data; and a desk-scale group-relative policy
//! optimization core verified against finite differences.

pub mod eval;
pub mod mas;
pub mod num;
pub mod plan;
pub mod query_gen;
pub mod reward;
pub mod sandbox;
#[cfg(test)]
pub(crate) mod test_support;
pub mod train;

pub use num::Scalar;

/// Toy policy over `f64` parameters, the default for tests and the CLI demo.
pub type ToyPolicy64 = train::ToyPolicy<f64>;
/// Toy policy over `f32` parameters.
pub type ToyPolicy32 = train::ToyPolicy<f32>;
/// GRPO configuration over `f64`.
pub type GrpoConfig64 = train::GrpoConfig<f64>;
/// GRPO configuration over `f32`.
pub type GrpoConfig32 = train::GrpoConfig<f32>;
