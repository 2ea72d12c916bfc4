//! Discrete-event timing of the four-stage chain on a virtual clock.
//!
//! Chunk `i` arrives at `i * chunk_seconds`. In sequential mode one chunk
//! runs through every stage before the next one starts. In pipelined mode
//! each stage is a single FIFO server and stages hand off through bounded
//! queues: a stage that finishes a chunk while the next queue is full holds
//! it until a slot frees. The ingress queue in front of the first stage is
//! unbounded because a live stream cannot be paused.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use super::ChunkPlan;
use crate::scalar::Seconds;

pub const STAGE_COUNT: usize = 4;
pub const DEFAULT_QUEUE_CAPACITY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    Stt,
    Qe,
    Qa,
    Tts,
}

impl StageName {
    pub const ORDER: [StageName; STAGE_COUNT] = [StageName::Stt, StageName::Qe, StageName::Qa, StageName::Tts];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Stt => "stt",
            StageName::Qe => "qe",
            StageName::Qa => "qa",
            StageName::Tts => "tts",
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimingError {
    #[error("stages must be exactly stt, qe, qa, tts in that order")]
    StageOrder,
    #[error("stage {0}: latency must be non-negative with low <= high")]
    Latency(StageName),
    #[error("queue_capacity must be >= 1")]
    QueueCapacity,
    #[error("need at least one chunk")]
    NoChunks,
    #[error("latency matrix has {got} rows for {expected} chunks")]
    Shape { expected: usize, got: usize },
}

/// Per-call latency of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel<T = f64> {
    Fixed(T),
    Uniform { low: T, high: T },
    Exponential { mean: T },
}

impl<T: Seconds> LatencyModel<T> {
    pub fn is_valid(&self) -> bool {
        let z = T::zero();
        match *self {
            LatencyModel::Fixed(v) => v >= z,
            LatencyModel::Uniform { low, high } => low >= z && low <= high,
            LatencyModel::Exponential { mean } => mean >= z,
        }
    }

    /// Fixed latencies come back exactly; random draws are quantized to microseconds.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> T {
        match *self {
            LatencyModel::Fixed(v) => v,
            LatencyModel::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    T::from_sampled(Uniform::new_inclusive(low.as_f64(), high.as_f64()).sample(rng))
                }
            }
            LatencyModel::Exponential { mean } => {
                if mean == T::zero() {
                    mean
                } else {
                    let exp = Exp::new(1.0 / mean.as_f64()).expect("positive rate");
                    T::from_sampled(exp.sample(rng))
                }
            }
        }
    }

    /// Upper bound on a draw, when one exists.
    pub fn max_value(&self) -> Option<T> {
        match *self {
            LatencyModel::Fixed(v) => Some(v),
            LatencyModel::Uniform { high, .. } => Some(high),
            LatencyModel::Exponential { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSpec<T = f64> {
    pub name: StageName,
    pub latency: LatencyModel<T>,
    /// The stage is bypassed (zero latency) for chunks that give it no work.
    #[serde(default)]
    pub skippable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    #[default]
    Sequential,
    Pipelined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStagePlan<T>", bound(deserialize = "T: Seconds + Deserialize<'de>"))]
pub struct StagePlan<T = f64> {
    stages: Vec<StageSpec<T>>,
    mode: ExecutionMode,
    queue_capacity: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStagePlan<T> {
    stages: Vec<StageSpec<T>>,
    #[serde(default)]
    mode: ExecutionMode,
    #[serde(default = "default_capacity")]
    queue_capacity: usize,
}

fn default_capacity() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

impl<T: Seconds> TryFrom<RawStagePlan<T>> for StagePlan<T> {
    type Error = TimingError;

    fn try_from(raw: RawStagePlan<T>) -> Result<Self, Self::Error> {
        StagePlan::new(raw.stages, raw.mode, raw.queue_capacity)
    }
}

impl<T: Seconds> StagePlan<T> {
    pub fn new(stages: Vec<StageSpec<T>>, mode: ExecutionMode, queue_capacity: usize) -> Result<Self, TimingError> {
        if stages.len() != STAGE_COUNT || stages.iter().zip(StageName::ORDER).any(|(s, n)| s.name != n) {
            return Err(TimingError::StageOrder);
        }
        if let Some(bad) = stages.iter().find(|s| !s.latency.is_valid()) {
            return Err(TimingError::Latency(bad.name));
        }
        if queue_capacity < 1 {
            return Err(TimingError::QueueCapacity);
        }
        Ok(StagePlan { stages, mode, queue_capacity })
    }

    /// Four fixed-latency stages; qa and tts are skippable.
    pub fn fixed(latencies: [T; STAGE_COUNT], mode: ExecutionMode) -> Result<Self, TimingError> {
        let stages = StageName::ORDER
            .iter()
            .zip(latencies)
            .map(|(&name, l)| StageSpec {
                name,
                latency: LatencyModel::Fixed(l),
                skippable: matches!(name, StageName::Qa | StageName::Tts),
            })
            .collect();
        Self::new(stages, mode, DEFAULT_QUEUE_CAPACITY)
    }

    pub fn stages(&self) -> &[StageSpec<T>] {
        &self.stages
    }

    pub fn mode(&self) -> ExecutionMode {
        self.mode
    }

    pub fn queue_capacity(&self) -> usize {
        self.queue_capacity
    }

    pub fn with_mode(mut self, mode: ExecutionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_queue_capacity(mut self, capacity: usize) -> Result<Self, TimingError> {
        if capacity < 1 {
            return Err(TimingError::QueueCapacity);
        }
        self.queue_capacity = capacity;
        Ok(self)
    }

    /// Draws a latency for every (chunk, stage), chunk-major, from one seeded stream.
    pub fn draw_latencies(&self, n_chunks: usize, seed: u64) -> Vec<[T; STAGE_COUNT]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_chunks)
            .map(|_| {
                let mut row = [T::zero(); STAGE_COUNT];
                for (slot, stage) in row.iter_mut().zip(&self.stages) {
                    *slot = stage.latency.sample(&mut rng);
                }
                row
            })
            .collect()
    }
}

impl Default for StagePlan<f64> {
    /// Measured STT and TTS latencies of the deployed models, with nominal
    /// question-extraction and answering costs.
    fn default() -> Self {
        StagePlan::fixed([0.94, 0.05, 1.0, 1.05], ExecutionMode::Sequential).expect("valid default plan")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkTiming<T = f64> {
    pub seq: u64,
    pub arrival_s: T,
    /// Time each stage finished with the chunk.
    pub stage_done_s: [T; STAGE_COUNT],
    pub completion_s: T,
    pub lag_s: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport<T = f64> {
    pub mode: ExecutionMode,
    pub per_chunk: Vec<ChunkTiming<T>>,
    pub max_lag_s: T,
    pub mean_lag_s: T,
    pub throughput_chunks_per_s: T,
}

/// Chunk arrival times `i * chunk_seconds`.
pub fn arrivals<T: Seconds>(n_chunks: usize, chunk_seconds: T) -> Vec<T> {
    (0..n_chunks).map(|i| T::of_count(i) * chunk_seconds).collect()
}

/// Finish time of every (chunk, stage) given per-call latencies.
pub fn schedule<T: Seconds>(
    arrivals: &[T],
    latencies: &[[T; STAGE_COUNT]],
    mode: ExecutionMode,
    queue_capacity: usize,
) -> Result<Vec<[T; STAGE_COUNT]>, TimingError> {
    if latencies.len() != arrivals.len() {
        return Err(TimingError::Shape { expected: arrivals.len(), got: latencies.len() });
    }
    if queue_capacity < 1 {
        return Err(TimingError::QueueCapacity);
    }
    let n = arrivals.len();
    let mut done = vec![[T::zero(); STAGE_COUNT]; n];
    match mode {
        ExecutionMode::Sequential => {
            let mut prev = T::zero();
            for i in 0..n {
                let mut t = if i == 0 { arrivals[0] } else { arrivals[i].max_of(prev) };
                for j in 0..STAGE_COUNT {
                    t = t + latencies[i][j];
                    done[i][j] = t;
                }
                prev = t;
            }
        }
        ExecutionMode::Pipelined => {
            let k = queue_capacity;
            let mut start = vec![[T::zero(); STAGE_COUNT]; n];
            // When stage j released chunk i downstream.
            let mut depart = vec![[T::zero(); STAGE_COUNT]; n];
            for i in 0..n {
                for j in 0..STAGE_COUNT {
                    let ready = if j == 0 { arrivals[i] } else { depart[i][j - 1] };
                    let s = if i == 0 { ready } else { ready.max_of(depart[i - 1][j]) };
                    start[i][j] = s;
                    done[i][j] = s + latencies[i][j];
                    // Chunk i fits in the queue behind stage j+1 once chunk i-k has entered service there.
                    depart[i][j] = if j + 1 < STAGE_COUNT && i >= k {
                        done[i][j].max_of(start[i - k][j + 1])
                    } else {
                        done[i][j]
                    };
                }
            }
        }
    }
    Ok(done)
}

/// Summarizes finish times into per-chunk lag and aggregate statistics.
pub fn timing_report<T: Seconds>(mode: ExecutionMode, arrivals: &[T], done: &[[T; STAGE_COUNT]]) -> TimingReport<T> {
    let per_chunk: Vec<ChunkTiming<T>> = arrivals
        .iter()
        .zip(done)
        .enumerate()
        .map(|(i, (&a, d))| {
            let completion = d[STAGE_COUNT - 1];
            ChunkTiming { seq: i as u64, arrival_s: a, stage_done_s: *d, completion_s: completion, lag_s: completion - a }
        })
        .collect();
    let zero = T::zero();
    let max_lag = per_chunk.iter().map(|c| c.lag_s).fold(zero, T::max_of);
    let n = per_chunk.len();
    let mean_lag = if n == 0 {
        zero
    } else {
        per_chunk.iter().fold(zero, |acc, c| acc + c.lag_s) / T::of_count(n)
    };
    let span = match (per_chunk.first(), per_chunk.iter().map(|c| c.completion_s).reduce(T::max_of)) {
        (Some(first), Some(last)) => last - first.arrival_s,
        _ => zero,
    };
    let throughput = if span > zero { T::of_count(n) / span } else { zero };
    TimingReport { mode, per_chunk, max_lag_s: max_lag, mean_lag_s: mean_lag, throughput_chunks_per_s: throughput }
}

/// Simulates `n_chunks` chunks through the plan. Deterministic for a fixed seed.
pub fn simulate_timing<T: Seconds>(
    plan: &StagePlan<T>,
    chunk: &ChunkPlan<T>,
    n_chunks: usize,
    seed: u64,
) -> Result<TimingReport<T>, TimingError> {
    if n_chunks == 0 {
        return Err(TimingError::NoChunks);
    }
    let arr = arrivals(n_chunks, chunk.chunk_seconds());
    let lat = plan.draw_latencies(n_chunks, seed);
    let done = schedule(&arr, &lat, plan.mode(), plan.queue_capacity())?;
    Ok(timing_report(plan.mode(), &arr, &done))
}
