//! Question extraction: a state machine that turns a transcript stream into
//! riddle boundaries and numbered clue events.
//!
//! Phrase detection runs on lowercased, punctuation-free token sequences so
//! transcription casing and punctuation cannot affect it.

mod classifier;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

pub use classifier::{AllClueClassifier, ClassifierSelector, RuleBaselineClassifier};

use crate::ports::{ClueClassifier, PortError, SegmentKind};
use crate::text::{contains_phrase, tokens};

/// A transcript fragment with stream-time bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedSegment {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
    pub seq: u64,
}

impl TimedSegment {
    pub fn new(seq: u64, start_s: f64, end_s: f64, text: impl Into<String>) -> Self {
        TimedSegment { text: text.into(), start_s, end_s, seq }
    }

    pub fn midpoint(&self) -> f64 {
        (self.start_s + self.end_s) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Idle,
    Active,
}

/// Segmentation state. Owned by exactly one task at a time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionState {
    phase: Phase,
    started: u32,
    clues: Vec<String>,
    last_seq: Option<u64>,
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Index of the active riddle, 0 while idle.
    pub fn riddle_index(&self) -> u32 {
        match self.phase {
            Phase::Idle => 0,
            Phase::Active => self.started,
        }
    }

    /// Number of riddle starts seen so far.
    pub fn riddles_started(&self) -> u32 {
        self.started
    }

    pub fn clues(&self) -> &[String] {
        &self.clues
    }

    fn start(&mut self, text: &str, events: &mut Vec<SegmentationEvent>) {
        self.started += 1;
        self.phase = Phase::Active;
        self.clues.clear();
        events.push(SegmentationEvent::new(EventKind::RiddleStarted, self.started, None, text));
    }

    fn end(&mut self, text: &str, events: &mut Vec<SegmentationEvent>) {
        events.push(SegmentationEvent::new(EventKind::RiddleEnded, self.started, None, text));
        self.phase = Phase::Idle;
        self.clues.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RiddleStarted,
    Clue,
    NonClue,
    RiddleEnded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationEvent {
    pub kind: EventKind,
    pub riddle_index: u32,
    /// 1-based position of a clue within its riddle; only set on clue events.
    pub clue_number: Option<u32>,
    pub text: String,
}

impl SegmentationEvent {
    fn new(kind: EventKind, riddle_index: u32, clue_number: Option<u32>, text: &str) -> Self {
        SegmentationEvent { kind, riddle_index, clue_number, text: text.to_owned() }
    }
}

pub fn default_start_phrases() -> Vec<String> {
    [
        "first riddle",
        "second riddle",
        "third riddle",
        "fourth riddle",
        "fifth riddle",
        "next riddle",
        "last riddle",
        "final riddle",
        "we begin",
    ]
    .map(String::from)
    .to_vec()
}

pub fn default_end_phrases() -> Vec<String> {
    ["that is the end of the riddle", "the answer is"].map(String::from).to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub start_phrases: Vec<String>,
    pub end_phrases: Vec<String>,
    /// Treat a standalone "riddle" token as a start, for mistranscribed starts.
    pub lenient_keyword: bool,
    pub classifier: ClassifierSelector,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            start_phrases: default_start_phrases(),
            end_phrases: default_end_phrases(),
            lenient_keyword: false,
            classifier: ClassifierSelector::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if self.start_phrases.iter().all(|p| tokens(p).is_empty()) {
            return Err(SegmentationError::Config("start_phrases must contain at least one phrase".into()));
        }
        Ok(())
    }

    pub fn lenient(mut self) -> Self {
        self.lenient_keyword = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SegmentationError {
    #[error("segment text is empty")]
    EmptySegment,
    #[error("segment seq {got} is not after {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("classifier failed on {text:?}: {source}")]
    Classifier {
        text: String,
        #[source]
        source: PortError,
    },
    #[error("invalid detector config: {0}")]
    Config(String),
}

fn any_phrase(toks: &[String], phrases: &[String]) -> bool {
    phrases.iter().any(|p| contains_phrase(toks, &tokens(p)))
}

/// True when a start phrase occurs in `text`, or, in lenient mode, when the
/// token "riddle" does.
pub fn detect_riddle_start(text: &str, config: &DetectorConfig) -> bool {
    let toks = tokens(text);
    any_phrase(&toks, &config.start_phrases)
        || (config.lenient_keyword && toks.iter().any(|t| t == "riddle"))
}

pub fn detect_riddle_end(text: &str, config: &DetectorConfig) -> bool {
    any_phrase(&tokens(text), &config.end_phrases)
}

pub fn classify_segment(text: &str, classifier: &dyn ClueClassifier) -> Result<SegmentKind, SegmentationError> {
    if text.trim().is_empty() {
        return Err(SegmentationError::EmptySegment);
    }
    classifier
        .classify(text)
        .map_err(|source| SegmentationError::Classifier { text: text.to_owned(), source })
}

/// Feeds one segment to the state machine.
///
/// A start phrase ends any active riddle and opens the next one; an end
/// phrase closes the active riddle; anything else inside a riddle is
/// classified as clue or non-clue. Segments seen while idle produce nothing.
/// Segments whose text has no tokens produce no events. On error the input
/// state is left untouched.
pub fn advance(
    state: &SessionState,
    segment: &TimedSegment,
    config: &DetectorConfig,
    classifier: &dyn ClueClassifier,
) -> Result<(SessionState, Vec<SegmentationEvent>), SegmentationError> {
    if let Some(last) = state.last_seq {
        if segment.seq <= last {
            return Err(SegmentationError::OutOfOrder { last, got: segment.seq });
        }
    }
    let mut next = state.clone();
    next.last_seq = Some(segment.seq);
    let mut events = Vec::new();
    let text = segment.text.trim();
    if tokens(text).is_empty() {
        return Ok((next, events));
    }

    if detect_riddle_start(text, config) {
        if next.phase == Phase::Active {
            next.end(text, &mut events);
        }
        next.start(text, &mut events);
    } else if next.phase == Phase::Active {
        if detect_riddle_end(text, config) {
            next.end(text, &mut events);
        } else {
            match classify_segment(text, classifier)? {
                SegmentKind::Clue => {
                    next.clues.push(text.to_owned());
                    let n = next.clues.len() as u32;
                    events.push(SegmentationEvent::new(EventKind::Clue, next.started, Some(n), text));
                }
                SegmentKind::NonClue => {
                    events.push(SegmentationEvent::new(EventKind::NonClue, next.started, None, text));
                }
            }
        }
    }
    Ok((next, events))
}

/// Closes an active riddle at stream end.
pub fn finish(state: &SessionState) -> (SessionState, Vec<SegmentationEvent>) {
    let mut next = state.clone();
    let mut events = Vec::new();
    if next.phase == Phase::Active {
        next.end("", &mut events);
    }
    (next, events)
}

/// Owns a session plus its configuration and classifier.
pub struct Segmenter {
    config: DetectorConfig,
    classifier: Box<dyn ClueClassifier>,
    state: SessionState,
}

impl Segmenter {
    pub fn new(config: DetectorConfig) -> Result<Self, SegmentationError> {
        let classifier = config.classifier.build();
        Self::with_classifier(config, classifier)
    }

    pub fn with_classifier(config: DetectorConfig, classifier: Box<dyn ClueClassifier>) -> Result<Self, SegmentationError> {
        config.validate()?;
        Ok(Segmenter { config, classifier, state: SessionState::new() })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn push(&mut self, segment: &TimedSegment) -> Result<Vec<SegmentationEvent>, SegmentationError> {
        let (next, events) = advance(&self.state, segment, &self.config, self.classifier.as_ref())?;
        self.state = next;
        Ok(events)
    }

    pub fn finish(&mut self) -> Vec<SegmentationEvent> {
        let (next, events) = finish(&self.state);
        self.state = next;
        events
    }

    /// Runs a whole stream, closing any open riddle at the end.
    pub fn run(&mut self, segments: &[TimedSegment]) -> Result<Vec<SegmentationEvent>, SegmentationError> {
        let mut out = Vec::new();
        for s in segments {
            out.extend(self.push(s)?);
        }
        out.extend(self.finish());
        Ok(out)
    }
}

/// Writes events as line-delimited JSON.
pub fn write_event_log<W: Write>(mut w: W, events: &[SegmentationEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
