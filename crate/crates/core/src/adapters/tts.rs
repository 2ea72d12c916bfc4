use std::sync::atomic::{AtomicU64, Ordering};

use crate::ports::{PortError, Speech, TtsPort};

/// Fixed-latency synthesizer returning synthetic handles.
#[derive(Debug)]
pub struct StubTts {
    latency_s: f64,
    calls: AtomicU64,
}

/// Mean latency of the deployed voice on conversational speech.
pub const DEFAULT_TTS_LATENCY_S: f64 = 1.05;

impl StubTts {
    pub fn new(latency_s: f64) -> Self {
        StubTts { latency_s, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Default for StubTts {
    fn default() -> Self {
        Self::new(DEFAULT_TTS_LATENCY_S)
    }
}

impl TtsPort for StubTts {
    fn synthesize(&self, text: &str) -> Result<Speech, PortError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(Speech {
            handle: format!("tts:{}", crate::dataset::normalize_answer(text).replace(' ', "_")),
            latency_s: self.latency_s,
        })
    }
}
