//! Streaming orchestration: timed chunking, the stt → qe → qa → tts chain,
//! and its timing on a virtual clock.

mod chunking;
mod engine;
mod timing;

pub use chunking::{
    audio_chunks, chunk_timed_stream, chunk_words, ChunkPlan, ChunkPlanError, DEFAULT_CHUNK_SECONDS,
    DEFAULT_WORDS_PER_CHUNK,
};
pub use engine::{
    run_pipeline, write_pipeline_log, AdapterSuite, Clock, LiveAttempt, LogRecord, PipelineConfig, PipelineError,
    PipelineRun, DEFAULT_MAX_CONSECUTIVE_FAILURES,
};
pub use timing::{
    arrivals, schedule, simulate_timing, timing_report, ChunkTiming, ExecutionMode, LatencyModel, StageName,
    StagePlan, StageSpec, TimingError, TimingReport, DEFAULT_QUEUE_CAPACITY, STAGE_COUNT,
};
