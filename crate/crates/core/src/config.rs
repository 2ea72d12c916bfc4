//! TOML run configuration.
//!
//! Every section and key is optional; missing values take the library
//! defaults. Unknown keys are rejected so typos surface immediately.
//!
//! ```toml
//! [eval]
//! protocol = "mock_live"
//! threshold = 3
//!
//! [chunking]
//! chunk_seconds = 5.0
//! words_per_chunk = 7
//!
//! [qa]
//! backend = "oracle"
//! reveal_after_clue = 3
//!
//! [pipeline]
//! mode = "pipelined"
//! queue_capacity = 8
//!
//! [stt]
//! rewrites = [["first riddle", "test riddle"]]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adapters::{ErrorInjection, DEFAULT_TTS_LATENCY_S};
use crate::harness::{EvalConfig, Protocol, QaBackend, VoteGranularity};
use crate::pipeline::{
    ChunkPlan, Clock, ExecutionMode, PipelineConfig, StagePlan, StageSpec, DEFAULT_MAX_CONSECUTIVE_FAILURES,
    DEFAULT_QUEUE_CAPACITY,
};
use crate::policy::{PromptTemplate, DEFAULT_SAMPLES_PER_STEP, DEFAULT_THRESHOLD};
use crate::segmentation::DetectorConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub protocol: Protocol,
    pub threshold: u32,
    pub samples_per_step: usize,
    pub vote_granularity: VoteGranularity,
    pub seed: u64,
    pub normalize_clues: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            protocol: Protocol::AllClues,
            threshold: DEFAULT_THRESHOLD,
            samples_per_step: DEFAULT_SAMPLES_PER_STEP,
            vote_granularity: VoteGranularity::PerChunk,
            seed: 0,
            normalize_clues: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub mode: ExecutionMode,
    pub queue_capacity: usize,
    pub clock: Clock,
    pub max_consecutive_failures: u32,
    /// Replaces the default stage latencies; must list stt, qe, qa, tts.
    pub stages: Option<Vec<StageSpec>>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            mode: ExecutionMode::Sequential,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            clock: Clock::Virtual,
            max_consecutive_failures: DEFAULT_MAX_CONSECUTIVE_FAILURES,
            stages: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtsSection {
    pub latency_s: f64,
}

impl Default for TtsSection {
    fn default() -> Self {
        TtsSection { latency_s: DEFAULT_TTS_LATENCY_S }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub eval: EvalSection,
    pub chunking: ChunkPlan,
    pub qa: QaBackend,
    pub detector: DetectorConfig,
    pub prompt: PromptTemplate,
    pub pipeline: PipelineSection,
    pub stt: ErrorInjection,
    pub tts: TtsSection,
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: AppConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.eval_config().validate().map_err(|e| invalid(&e))?;
        self.detector.validate().map_err(|e| invalid(&e))?;
        self.prompt.validate().map_err(|e| invalid(&e))?;
        if !(0.0..=1.0).contains(&self.stt.substitution_prob) {
            return Err(ConfigError::Invalid("stt.substitution_prob must be in [0, 1]".into()));
        }
        if !(self.tts.latency_s >= 0.0) {
            return Err(ConfigError::Invalid("tts.latency_s must be >= 0".into()));
        }
        self.pipeline_config()?;
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            protocol: self.eval.protocol,
            threshold: self.eval.threshold,
            samples_per_step: self.eval.samples_per_step,
            chunking: self.chunking,
            vote_granularity: self.eval.vote_granularity,
            seed: self.eval.seed,
            normalize_clues: self.eval.normalize_clues,
            qa_backend: self.qa.clone(),
        }
    }

    pub fn stage_plan(&self) -> Result<StagePlan, ConfigError> {
        let p = &self.pipeline;
        let base = match &p.stages {
            Some(stages) => StagePlan::new(stages.clone(), p.mode, p.queue_capacity),
            None => StagePlan::default().with_mode(p.mode).with_queue_capacity(p.queue_capacity),
        };
        base.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, ConfigError> {
        let p = &self.pipeline;
        if p.max_consecutive_failures < 1 {
            return Err(ConfigError::Invalid("pipeline.max_consecutive_failures must be >= 1".into()));
        }
        Ok(PipelineConfig {
            chunk: self.chunking,
            detector: self.detector.clone(),
            vote: self.eval_config().vote_settings(),
            template: self.prompt.clone(),
            stages: self.stage_plan()?,
            clock: p.clock,
            seed: self.eval.seed,
            max_consecutive_failures: p.max_consecutive_failures,
        })
    }
}
