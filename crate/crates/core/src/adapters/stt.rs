use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::pipeline::{chunk_timed_stream, ChunkPlan};
use crate::ports::{AudioChunk, PortError, PortKind, SttPort, Transcript};
use crate::segmentation::TimedSegment;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed transcript CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("transcript row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid rewrite pattern {0:?}")]
    Pattern(String),
}

/// An annotated transcript: timed source segments, optionally labelled with
/// the riddle each belongs to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayTranscript {
    pub segments: Vec<TimedSegment>,
    pub labels: Vec<Option<String>>,
}

impl ReplayTranscript {
    pub fn new(segments: Vec<TimedSegment>) -> Self {
        let labels = vec![None; segments.len()];
        ReplayTranscript { segments, labels }
    }

    pub fn labelled(segments: Vec<(TimedSegment, Option<String>)>) -> Self {
        let (segments, labels) = segments.into_iter().unzip();
        ReplayTranscript { segments, labels }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.end_s).fold(0.0, f64::max)
    }

    /// `(riddle_id, start_s, end_s)` spans covered by each label, in order of first appearance.
    pub fn riddle_spans(&self) -> Vec<(String, f64, f64)> {
        let mut spans: Vec<(String, f64, f64)> = Vec::new();
        for (seg, label) in self.segments.iter().zip(&self.labels) {
            let Some(id) = label else { continue };
            match spans.iter_mut().find(|(s, _, _)| s == id) {
                Some(span) => {
                    span.1 = span.1.min(seg.start_s);
                    span.2 = span.2.max(seg.end_s);
                }
                None => spans.push((id.clone(), seg.start_s, seg.end_s)),
            }
        }
        spans
    }
}

#[derive(Deserialize)]
struct RawRow {
    start_s: f64,
    end_s: f64,
    text: String,
    #[serde(default)]
    riddle_id: Option<String>,
}

/// Reads `start_s,end_s,text[,riddle_id]` rows.
pub fn load_replay_transcript(path: impl AsRef<Path>) -> Result<ReplayTranscript, ReplayError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ReplayError::Io { path: path.to_path_buf(), source })?;
    parse_replay_transcript(file)
}

pub fn parse_replay_transcript<R: Read>(reader: R) -> Result<ReplayTranscript, ReplayError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut last_start = 0.0;
    for (idx, row) in rdr.deserialize::<RawRow>().enumerate() {
        let row_no = idx + 1;
        let raw = row?;
        let bad = |m: &str| ReplayError::Row { row: row_no, message: m.to_owned() };
        if !(raw.start_s >= 0.0 && raw.start_s < raw.end_s) {
            return Err(bad("need 0 <= start_s < end_s"));
        }
        if raw.start_s < last_start {
            return Err(bad("start times must be non-decreasing"));
        }
        last_start = raw.start_s;
        let label = raw.riddle_id.filter(|s| !s.is_empty());
        out.push((TimedSegment::new(idx as u64, raw.start_s, raw.end_s, raw.text), label));
    }
    Ok(ReplayTranscript::labelled(out))
}

/// Transcription faults injected by [`ReplayStt`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorInjection {
    /// Case-insensitive phrase rewrites, e.g. `["first riddle", "test riddle"]`.
    pub rewrites: Vec<(String, String)>,
    /// Probability of replacing each word with a confusable one.
    pub substitution_prob: f64,
    pub seed: u64,
    /// Chunks whose transcription fails outright.
    pub fail_chunks: BTreeSet<u64>,
}

const CONFUSABLES: [&str; 8] = ["test", "tell", "uh", "the", "riddles", "fear", "wait", "and"];

/// Speech-to-text stand-in that replays an annotated transcript.
pub struct ReplayStt {
    chunks: Vec<String>,
    fail: BTreeSet<u64>,
}

impl ReplayStt {
    pub fn new(transcript: &ReplayTranscript, plan: &ChunkPlan, injection: &ErrorInjection) -> Result<Self, ReplayError> {
        let rewrites = injection
            .rewrites
            .iter()
            .map(|(from, to)| {
                let words: Vec<String> = from.split_whitespace().map(regex::escape).collect();
                Regex::new(&format!(r"(?i)\b{}\b", words.join(r"\s+")))
                    .map(|re| (re, to.clone()))
                    .map_err(|_| ReplayError::Pattern(from.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let chunks = chunk_timed_stream(&transcript.segments, plan)
            .into_iter()
            .map(|c| {
                let mut text = c.text;
                for (re, to) in &rewrites {
                    text = re.replace_all(&text, to.as_str()).into_owned();
                }
                if injection.substitution_prob > 0.0 {
                    // Seeded per chunk so the output is independent of call order.
                    let mut rng = ChaCha8Rng::seed_from_u64(injection.seed ^ c.seq.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    text = text
                        .split_whitespace()
                        .map(|w| {
                            if rng.gen_bool(injection.substitution_prob.clamp(0.0, 1.0)) {
                                CONFUSABLES[rng.gen_range(0..CONFUSABLES.len())]
                            } else {
                                w
                            }
                        })
                        .collect::<Vec<_>>()
                        .join(" ");
                }
                text
            })
            .collect();
        Ok(ReplayStt { chunks, fail: injection.fail_chunks.clone() })
    }

    pub fn chunk_texts(&self) -> &[String] {
        &self.chunks
    }
}

impl SttPort for ReplayStt {
    fn transcribe(&self, chunk: &AudioChunk) -> Result<Transcript, PortError> {
        if self.fail.contains(&chunk.seq) {
            return Err(PortError::new(PortKind::Stt, format!("injected failure on chunk {}", chunk.seq)));
        }
        let text = self
            .chunks
            .get(chunk.seq as usize)
            .cloned()
            .ok_or_else(|| PortError::new(PortKind::Stt, format!("no audio for chunk {}", chunk.seq)))?;
        Ok(Transcript { text })
    }
}
