//! Contracts for the four external capabilities the engine drives.
//!
//! Every model sits behind one of these traits so deterministic mocks and
//! real backends are interchangeable. Implementations must be `Send + Sync`;
//! the engine gives each port to a single stage worker, so calls to one port
//! never overlap.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortKind {
    Stt,
    Classifier,
    Qa,
    Tts,
}

impl fmt::Display for PortKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortKind::Stt => "stt",
            PortKind::Classifier => "classifier",
            PortKind::Qa => "qa",
            PortKind::Tts => "tts",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{port} port failed: {message}")]
pub struct PortError {
    pub port: PortKind,
    pub message: String,
}

impl PortError {
    pub fn new(port: PortKind, message: impl Into<String>) -> Self {
        PortError { port, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Clue,
    NonClue,
}

pub trait ClueClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<SegmentKind, PortError>;
}

/// Opaque handle to one window of stream audio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioChunk {
    pub seq: u64,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub text: String,
}

pub trait SttPort: Send + Sync {
    fn transcribe(&self, chunk: &AudioChunk) -> Result<Transcript, PortError>;
}

/// One request for `n_samples` answers.
///
/// `input_text` is the accumulated clue text; `prompt` is the full prompt
/// built around it for language-model backends.
#[derive(Debug, Clone, Copy)]
pub struct QaQuery<'a> {
    pub input_text: &'a str,
    pub prompt: &'a str,
    pub n_samples: usize,
}

pub trait QaPort: Send + Sync {
    /// Returns exactly `query.n_samples` answers.
    fn answer(&self, query: &QaQuery<'_>) -> Result<Vec<String>, PortError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Speech {
    pub handle: String,
    pub latency_s: f64,
}

pub trait TtsPort: Send + Sync {
    fn synthesize(&self, text: &str) -> Result<Speech, PortError>;
}

macro_rules! forward {
    ($tr:ident, $method:ident, $arg:ty, $out:ty) => {
        impl<T: $tr + ?Sized> $tr for Box<T> {
            fn $method(&self, a: $arg) -> $out {
                (**self).$method(a)
            }
        }
        impl<T: $tr + ?Sized> $tr for Arc<T> {
            fn $method(&self, a: $arg) -> $out {
                (**self).$method(a)
            }
        }
        impl<T: $tr + ?Sized> $tr for &T {
            fn $method(&self, a: $arg) -> $out {
                (**self).$method(a)
            }
        }
    };
}

forward!(ClueClassifier, classify, &str, Result<SegmentKind, PortError>);
forward!(SttPort, transcribe, &AudioChunk, Result<Transcript, PortError>);
forward!(QaPort, answer, &QaQuery<'_>, Result<Vec<String>, PortError>);
forward!(TtsPort, synthesize, &str, Result<Speech, PortError>);
