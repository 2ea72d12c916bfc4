//! The live chain: stt → qe (segmentation) → qa (voting) → tts.
//!
//! Each stage is a function over a per-chunk work item. Sequential mode
//! applies them in a loop; pipelined mode runs one worker thread per stage
//! connected by bounded channels. Stages see chunks in seq order and own
//! their state, so the event log is the same in both modes; only the
//! timestamps differ.

use std::io::{self, Write};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::timing::{schedule, timing_report, ExecutionMode, StageName, StagePlan, TimingReport, STAGE_COUNT};
use super::ChunkPlan;
use crate::policy::{sample_step, PolicyError, PromptTemplate, VoteSettings, VoteState};
use crate::ports::{AudioChunk, ClueClassifier, PortError, PortKind, QaPort, SttPort, TtsPort};
use crate::segmentation::{
    advance, finish, DetectorConfig, EventKind, SegmentationError, SegmentationEvent, SessionState, TimedSegment,
};

pub const DEFAULT_MAX_CONSECUTIVE_FAILURES: u32 = 3;

/// The four ports the chain runs over.
pub struct AdapterSuite<'a> {
    pub stt: Box<dyn SttPort + 'a>,
    pub classifier: Box<dyn ClueClassifier + 'a>,
    pub qa: Box<dyn QaPort + 'a>,
    pub tts: Box<dyn TtsPort + 'a>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// Timestamps from the discrete-event model; reproducible.
    #[default]
    Virtual,
    /// Chunks are released at their stream time and timestamps are measured.
    Wall,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub chunk: ChunkPlan,
    pub detector: DetectorConfig,
    pub vote: VoteSettings,
    pub template: PromptTemplate,
    pub stages: StagePlan,
    pub clock: Clock,
    /// Seed for the virtual-clock latency draws.
    pub seed: u64,
    /// Consecutive failures of one port that abort the run.
    pub max_consecutive_failures: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chunk: ChunkPlan::default(),
            detector: DetectorConfig::default(),
            vote: VoteSettings::default(),
            template: PromptTemplate::default(),
            stages: StagePlan::default(),
            clock: Clock::Virtual,
            seed: 0,
            max_consecutive_failures: DEFAULT_MAX_CONSECUTIVE_FAILURES,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("chunk seq {got} does not follow {last}")]
    ChunkOrder { last: u64, got: u64 },
    #[error("{port} failed {failures} times in a row (last at chunk {seq} in stage {stage}): {last}")]
    Aborted { port: PortKind, stage: StageName, seq: u64, failures: u32, last: PortError },
}

impl From<PolicyError> for PipelineError {
    fn from(e: PolicyError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<SegmentationError> for PipelineError {
    fn from(e: SegmentationError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts_s: f64,
    pub chunk_seq: u64,
    pub stage: StageName,
    pub kind: String,
    pub payload: Value,
}

/// An answer the chain committed to on air.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveAttempt {
    /// 1-based index of the detected riddle.
    pub riddle_index: u32,
    pub answer: String,
    /// Clues detected in the riddle when the attempt was made.
    pub clue_number: u32,
    pub chunk_seq: u64,
    /// Stream time of the chunk that triggered the attempt.
    pub chunk_start_s: f64,
    pub ts_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub events: Vec<LogRecord>,
    pub attempts: Vec<LiveAttempt>,
    pub riddles_detected: u32,
    pub timing: TimingReport,
}

/// Writes the event log as line-delimited JSON.
pub fn write_pipeline_log<W: Write>(mut w: W, events: &[LogRecord]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Worked,
    /// Nothing for the stage to do on this chunk.
    Idle,
    Failed,
    /// An upstream stage failed.
    Bypassed,
}

struct Draft {
    seq: u64,
    stage: StageName,
    kind: String,
    payload: Value,
}

struct Work {
    chunk: AudioChunk,
    text: Option<String>,
    events: Vec<SegmentationEvent>,
    attempt: Option<LiveAttempt>,
    outcome: [Outcome; STAGE_COUNT],
    wall_done: [f64; STAGE_COUNT],
    drafts: Vec<Draft>,
}

impl Work {
    fn new(chunk: AudioChunk) -> Self {
        Work {
            chunk,
            text: None,
            events: Vec::new(),
            attempt: None,
            outcome: [Outcome::Bypassed; STAGE_COUNT],
            wall_done: [0.0; STAGE_COUNT],
            drafts: Vec::new(),
        }
    }

    fn log(&mut self, stage: StageName, kind: &str, payload: Value) {
        self.drafts.push(Draft { seq: self.chunk.seq, stage, kind: kind.to_owned(), payload });
    }

    fn upstream_ok(&self, stage: StageName) -> bool {
        self.outcome[..stage.index()].iter().all(|o| matches!(o, Outcome::Worked | Outcome::Idle))
    }
}

struct Abort {
    port: PortKind,
    stage: StageName,
    seq: u64,
    failures: u32,
    last: PortError,
}

impl Abort {
    fn key(&self) -> (u64, usize) {
        (self.seq, self.stage.index())
    }
}

struct FailureCounter {
    limit: u32,
    run: u32,
}

impl FailureCounter {
    fn ok(&mut self) {
        self.run = 0;
    }

    fn fail(&mut self, stage: StageName, seq: u64, e: &PortError) -> Result<(), Abort> {
        self.run += 1;
        log::warn!("{stage} failed on chunk {seq}: {e}");
        if self.run >= self.limit {
            Err(Abort { port: e.port, stage, seq, failures: self.run, last: e.clone() })
        } else {
            Ok(())
        }
    }
}

struct Ctx<'c> {
    start: Instant,
    clock: Clock,
    config: &'c PipelineConfig,
}

impl Ctx<'_> {
    fn stamp(&self, work: &mut Work, stage: StageName) {
        work.wall_done[stage.index()] = self.start.elapsed().as_secs_f64();
    }
}

struct SttStage<'a> {
    port: &'a dyn SttPort,
    failures: FailureCounter,
}

impl SttStage<'_> {
    fn run(&mut self, ctx: &Ctx, work: &mut Work) -> Result<(), Abort> {
        if ctx.clock == Clock::Wall {
            let due = Duration::from_secs_f64(work.chunk.start_s.max(0.0));
            if let Some(wait) = due.checked_sub(ctx.start.elapsed()) {
                thread::sleep(wait);
            }
        }
        let stage = StageName::Stt;
        match self.port.transcribe(&work.chunk) {
            Ok(t) => {
                self.failures.ok();
                work.log(stage, "transcribed", json!({ "text": t.text }));
                work.text = Some(t.text);
                work.outcome[0] = Outcome::Worked;
            }
            Err(e) => {
                work.log(stage, "failed", json!({ "error": e.to_string() }));
                work.outcome[0] = Outcome::Failed;
                self.failures.fail(stage, work.chunk.seq, &e)?;
            }
        }
        ctx.stamp(work, stage);
        Ok(())
    }
}

fn event_kind(kind: EventKind) -> &'static str {
    match kind {
        EventKind::RiddleStarted => "riddle_started",
        EventKind::Clue => "clue",
        EventKind::NonClue => "non_clue",
        EventKind::RiddleEnded => "riddle_ended",
    }
}

fn event_payload(e: &SegmentationEvent) -> Value {
    json!({ "riddle_index": e.riddle_index, "clue_number": e.clue_number, "text": e.text })
}

struct QeStage<'a> {
    classifier: &'a dyn ClueClassifier,
    state: SessionState,
    failures: FailureCounter,
}

impl QeStage<'_> {
    fn run(&mut self, ctx: &Ctx, work: &mut Work) -> Result<(), Abort> {
        let stage = StageName::Qe;
        if !work.upstream_ok(stage) {
            work.wall_done[1] = work.wall_done[0];
            return Ok(());
        }
        let text = work.text.clone().unwrap_or_default();
        let segment = TimedSegment::new(work.chunk.seq, work.chunk.start_s, work.chunk.end_s, text);
        match advance(&self.state, &segment, &ctx.config.detector, self.classifier) {
            Ok((next, events)) => {
                self.failures.ok();
                self.state = next;
                for e in &events {
                    work.log(stage, event_kind(e.kind), event_payload(e));
                }
                work.events = events;
                work.outcome[1] = Outcome::Worked;
            }
            Err(err) => {
                let port_err = match err {
                    SegmentationError::Classifier { source, .. } => source,
                    other => PortError::new(PortKind::Classifier, other.to_string()),
                };
                work.log(stage, "failed", json!({ "error": port_err.to_string() }));
                work.outcome[1] = Outcome::Failed;
                self.failures.fail(stage, work.chunk.seq, &port_err)?;
            }
        }
        ctx.stamp(work, stage);
        Ok(())
    }

    /// Closes a riddle still open at stream end.
    fn finish(&mut self, last_seq: u64) -> Vec<Draft> {
        let (next, events) = finish(&self.state);
        self.state = next;
        events
            .iter()
            .map(|e| Draft { seq: last_seq, stage: StageName::Qe, kind: event_kind(e.kind).to_owned(), payload: event_payload(e) })
            .collect()
    }

    fn riddles_started(&self) -> u32 {
        self.state.riddles_started()
    }
}

struct QaStage<'a> {
    port: &'a dyn QaPort,
    vote: Option<VoteState>,
    riddle_index: u32,
    clues: Vec<String>,
    failures: FailureCounter,
}

impl QaStage<'_> {
    fn run(&mut self, ctx: &Ctx, work: &mut Work) -> Result<(), Abort> {
        let stage = StageName::Qa;
        if !work.upstream_ok(stage) {
            work.wall_done[2] = work.wall_done[1];
            return Ok(());
        }
        work.outcome[2] = Outcome::Idle;
        let events = std::mem::take(&mut work.events);
        for e in &events {
            match e.kind {
                EventKind::RiddleStarted => {
                    self.vote = Some(ctx.config.vote.fresh_state().expect("settings validated"));
                    self.riddle_index = e.riddle_index;
                    self.clues.clear();
                }
                EventKind::RiddleEnded => self.vote = None,
                EventKind::NonClue => {}
                EventKind::Clue => {
                    self.clues.push(e.text.clone());
                    let Some(vote) = self.vote.as_mut().filter(|v| !v.attempted()) else { continue };
                    let n = ctx.config.vote.samples_per_step;
                    let step = sample_step(self.port, &self.clues, &ctx.config.template, n).expect("template validated");
                    let clue_number = self.clues.len() as u32;
                    match step {
                        Ok(samples) => {
                            self.failures.ok();
                            if work.outcome[2] != Outcome::Failed {
                                work.outcome[2] = Outcome::Worked;
                            }
                            work.log(
                                stage,
                                "samples",
                                json!({ "riddle_index": self.riddle_index, "clue_number": clue_number, "candidates": samples.candidates }),
                            );
                            if let Some(answer) = vote.step(&samples).expect("fresh vote state") {
                                work.log(
                                    stage,
                                    "attempt",
                                    json!({ "riddle_index": self.riddle_index, "clue_number": clue_number, "answer": answer }),
                                );
                                work.attempt = Some(LiveAttempt {
                                    riddle_index: self.riddle_index,
                                    answer,
                                    clue_number,
                                    chunk_seq: work.chunk.seq,
                                    chunk_start_s: work.chunk.start_s,
                                    ts_s: 0.0,
                                });
                            }
                        }
                        Err(err) => {
                            vote.skip_step().expect("fresh vote state");
                            work.log(stage, "failed", json!({ "riddle_index": self.riddle_index, "error": err.to_string() }));
                            work.outcome[2] = Outcome::Failed;
                            self.failures.fail(stage, work.chunk.seq, &err)?;
                        }
                    }
                }
            }
        }
        work.events = events;
        ctx.stamp(work, stage);
        Ok(())
    }
}

struct TtsStage<'a> {
    port: &'a dyn TtsPort,
    failures: FailureCounter,
}

impl TtsStage<'_> {
    fn run(&mut self, ctx: &Ctx, work: &mut Work) -> Result<(), Abort> {
        let stage = StageName::Tts;
        if !work.upstream_ok(stage) {
            work.wall_done[3] = work.wall_done[2];
            return Ok(());
        }
        let Some(attempt) = work.attempt.as_ref() else {
            work.outcome[3] = Outcome::Idle;
            ctx.stamp(work, stage);
            return Ok(());
        };
        let answer = attempt.answer.clone();
        match self.port.synthesize(&answer) {
            Ok(speech) => {
                self.failures.ok();
                work.log(stage, "spoken", json!({ "answer": answer, "handle": speech.handle }));
                work.outcome[3] = Outcome::Worked;
            }
            Err(e) => {
                work.log(stage, "failed", json!({ "error": e.to_string() }));
                work.outcome[3] = Outcome::Failed;
                self.failures.fail(stage, work.chunk.seq, &e)?;
            }
        }
        ctx.stamp(work, stage);
        Ok(())
    }
}

struct Stages<'a> {
    stt: SttStage<'a>,
    qe: QeStage<'a>,
    qa: QaStage<'a>,
    tts: TtsStage<'a>,
}

fn validate(chunks: &[AudioChunk], config: &PipelineConfig) -> Result<(), PipelineError> {
    config.detector.validate()?;
    config.template.validate()?;
    config.vote.fresh_state()?;
    if config.max_consecutive_failures < 1 {
        return Err(PipelineError::Config("max_consecutive_failures must be >= 1".into()));
    }
    for pair in chunks.windows(2) {
        if pair[1].seq <= pair[0].seq {
            return Err(PipelineError::ChunkOrder { last: pair[0].seq, got: pair[1].seq });
        }
    }
    Ok(())
}

fn run_sequential(ctx: &Ctx, chunks: &[AudioChunk], s: &mut Stages) -> (Vec<Work>, Vec<Abort>) {
    let mut done = Vec::with_capacity(chunks.len());
    for chunk in chunks {
        let mut work = Work::new(*chunk);
        let r = s
            .stt
            .run(ctx, &mut work)
            .and_then(|_| s.qe.run(ctx, &mut work))
            .and_then(|_| s.qa.run(ctx, &mut work))
            .and_then(|_| s.tts.run(ctx, &mut work));
        if let Err(a) = r {
            return (done, vec![a]);
        }
        done.push(work);
    }
    (done, Vec::new())
}

/// Forwards work items through one stage until the input closes or the stage aborts.
fn worker<F>(rx: Receiver<Work>, tx: SyncSender<Work>, mut f: F) -> Option<Abort>
where
    F: FnMut(&mut Work) -> Result<(), Abort>,
{
    for mut work in rx {
        if let Err(a) = f(&mut work) {
            return Some(a);
        }
        if tx.send(work).is_err() {
            break;
        }
    }
    None
}

fn run_pipelined(ctx: &Ctx, chunks: &[AudioChunk], s: &mut Stages, capacity: usize) -> (Vec<Work>, Vec<Abort>) {
    let Stages { stt, qe, qa, tts } = s;
    thread::scope(|scope| {
        // The stream is not paused for a slow consumer, so ingress is unbounded.
        let (in_tx, in_rx) = std::sync::mpsc::channel::<Work>();
        let (a_tx, a_rx) = sync_channel::<Work>(capacity);
        let (b_tx, b_rx) = sync_channel::<Work>(capacity);
        let (c_tx, c_rx) = sync_channel::<Work>(capacity);
        // Drained as soon as ingress is filled, so the last stage never waits long.
        let (out_tx, out_rx) = sync_channel::<Work>(capacity);
        let handles = [
            scope.spawn(move || worker(in_rx, a_tx, |w| stt.run(ctx, w))),
            scope.spawn(move || worker(a_rx, b_tx, |w| qe.run(ctx, w))),
            scope.spawn(move || worker(b_rx, c_tx, |w| qa.run(ctx, w))),
            scope.spawn(move || worker(c_rx, out_tx, |w| tts.run(ctx, w))),
        ];
        for chunk in chunks {
            if in_tx.send(Work::new(*chunk)).is_err() {
                break;
            }
        }
        drop(in_tx);
        let done: Vec<Work> = out_rx.iter().collect();
        let aborts = handles.into_iter().filter_map(|h| h.join().expect("stage worker panicked")).collect();
        (done, aborts)
    })
}

/// Runs the chain over a chunked stream.
///
/// Per-chunk stage failures are logged and skip the chunk's downstream
/// stages. A port failing `max_consecutive_failures` times in a row aborts
/// the run; when several stages abort the earliest (chunk, stage) is reported.
pub fn run_pipeline(
    chunks: &[AudioChunk],
    adapters: &AdapterSuite<'_>,
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    validate(chunks, config)?;
    let counter = || FailureCounter { limit: config.max_consecutive_failures, run: 0 };
    let mut stages = Stages {
        stt: SttStage { port: adapters.stt.as_ref(), failures: counter() },
        qe: QeStage { classifier: adapters.classifier.as_ref(), state: SessionState::new(), failures: counter() },
        qa: QaStage { port: adapters.qa.as_ref(), vote: None, riddle_index: 0, clues: Vec::new(), failures: counter() },
        tts: TtsStage { port: adapters.tts.as_ref(), failures: counter() },
    };
    let ctx = Ctx { start: Instant::now(), clock: config.clock, config };
    let mode = config.stages.mode();
    let (mut done, mut aborts) = match mode {
        ExecutionMode::Sequential => run_sequential(&ctx, chunks, &mut stages),
        ExecutionMode::Pipelined => run_pipelined(&ctx, chunks, &mut stages, config.stages.queue_capacity()),
    };
    aborts.sort_by_key(Abort::key);
    if let Some(a) = aborts.into_iter().next() {
        return Err(PipelineError::Aborted { port: a.port, stage: a.stage, seq: a.seq, failures: a.failures, last: a.last });
    }
    done.sort_by_key(|w| w.chunk.seq);
    let tail = match done.last() {
        Some(w) => stages.qe.finish(w.chunk.seq),
        None => Vec::new(),
    };

    let arrivals: Vec<f64> = done.iter().map(|w| w.chunk.start_s).collect();
    let finish_times = match config.clock {
        Clock::Virtual => {
            let drawn = config.stages.draw_latencies(done.len(), config.seed);
            let latencies: Vec<[f64; STAGE_COUNT]> = done
                .iter()
                .zip(drawn)
                .map(|(w, row)| {
                    let mut out = [0.0; STAGE_COUNT];
                    for j in 0..STAGE_COUNT {
                        let skippable = config.stages.stages()[j].skippable;
                        out[j] = match w.outcome[j] {
                            Outcome::Worked | Outcome::Failed => row[j],
                            Outcome::Idle if !skippable => row[j],
                            Outcome::Idle | Outcome::Bypassed => 0.0,
                        };
                    }
                    out
                })
                .collect();
            schedule(&arrivals, &latencies, mode, config.stages.queue_capacity())
                .map_err(|e| PipelineError::Config(e.to_string()))?
        }
        Clock::Wall => done.iter().map(|w| w.wall_done).collect(),
    };
    let timing = timing_report(mode, &arrivals, &finish_times);

    let seqs: Vec<u64> = done.iter().map(|w| w.chunk.seq).collect();
    let ts_of = |seq: u64, stage: StageName| -> f64 {
        seqs.binary_search(&seq)
            .map(|i| finish_times[i][stage.index()])
            .unwrap_or(0.0)
    };
    let mut drafts: Vec<Draft> = Vec::new();
    let mut attempts = Vec::new();
    for (i, w) in done.iter_mut().enumerate() {
        drafts.append(&mut w.drafts);
        if let Some(mut a) = w.attempt.take() {
            a.ts_s = finish_times[i][StageName::Qa.index()];
            attempts.push(a);
        }
    }
    drafts.extend(tail);
    drafts.sort_by_key(|d| (d.seq, d.stage.index()));
    let events = drafts
        .into_iter()
        .map(|d| LogRecord { ts_s: ts_of(d.seq, d.stage), chunk_seq: d.seq, stage: d.stage, kind: d.kind, payload: d.payload })
        .collect();
    Ok(PipelineRun { events, attempts, riddles_detected: stages.qe.riddles_started(), timing })
}
