//! Real-time riddle answering for a live science-quiz round.
//!
//! The chain transcribes stream chunks, segments the transcript into riddles
//! and clues, votes over repeated QA samples and speaks the committed answer.
//! Every external model sits behind a port in [`ports`]; [`adapters`] holds
//! deterministic stand-ins for replay and evaluation.
//!
//! The timing simulator is generic over the clock scalar ([`scalar::Seconds`]);
//! the aliases below fix it to `f64`, `f32` or exact rationals.

pub mod adapters;
pub mod config;
pub mod dataset;
pub mod harness;
pub mod matching;
pub mod pipeline;
pub mod policy;
pub mod ports;
pub mod scalar;
pub mod segmentation;
pub mod text;

pub use config::{AppConfig, ConfigError};
pub use dataset::{load_riddle_dataset, normalize_answer, HumanAnnotation, Riddle, RiddleDataset};
pub use harness::{eval_all_clues, eval_mock_live, human_benchmark, EvalConfig, EvalError};
pub use matching::{match_answer, points_for_clue, word_error_rate, AttemptRecord, EvalReport, MatchResult};
pub use pipeline::{run_pipeline, simulate_timing, AdapterSuite, PipelineConfig, PipelineRun};
pub use policy::{vote_step, PromptTemplate, VoteState};
pub use scalar::Seconds;

/// Exact clock scalar: no rounding anywhere in the recurrences.
pub type Rational = num_rational::Rational64;

pub type StagePlan64 = pipeline::StagePlan<f64>;
pub type StagePlan32 = pipeline::StagePlan<f32>;
pub type StagePlanExact = pipeline::StagePlan<Rational>;

pub type ChunkPlan64 = pipeline::ChunkPlan<f64>;
pub type ChunkPlan32 = pipeline::ChunkPlan<f32>;
pub type ChunkPlanExact = pipeline::ChunkPlan<Rational>;

pub type TimingReport64 = pipeline::TimingReport<f64>;
pub type TimingReport32 = pipeline::TimingReport<f32>;
pub type TimingReportExact = pipeline::TimingReport<Rational>;
