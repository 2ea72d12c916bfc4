//! Bundled adapters: deterministic mocks for every port plus a
//! line-delimited JSON client for out-of-process QA backends.

mod line_json;
mod qa;
mod stt;
mod tts;

pub use line_json::{serve_qa, LineJsonQa, QaRequest, QaResponse};
pub use qa::{ConstantQa, FreshQa, OracleQa, ScriptedQa, WrongAnswers};
pub use stt::{load_replay_transcript, parse_replay_transcript, ErrorInjection, ReplayError, ReplayStt, ReplayTranscript};
pub use tts::{StubTts, DEFAULT_TTS_LATENCY_S};
