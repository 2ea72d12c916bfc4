use serde::{Deserialize, Serialize};

use crate::ports::AudioChunk;
use crate::scalar::Seconds;
use crate::segmentation::TimedSegment;

pub const DEFAULT_CHUNK_SECONDS: f64 = 5.0;
pub const DEFAULT_WORDS_PER_CHUNK: usize = 7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid chunk plan: {0}")]
pub struct ChunkPlanError(pub &'static str);

/// Stream chunk sizes: seconds of audio per STT call and words per mock-live step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChunkPlan<T>", bound(deserialize = "T: Seconds + Deserialize<'de>"))]
pub struct ChunkPlan<T = f64> {
    chunk_seconds: T,
    words_per_chunk: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChunkPlan<T> {
    chunk_seconds: T,
    words_per_chunk: usize,
}

impl<T: Seconds> TryFrom<RawChunkPlan<T>> for ChunkPlan<T> {
    type Error = ChunkPlanError;

    fn try_from(raw: RawChunkPlan<T>) -> Result<Self, Self::Error> {
        ChunkPlan::new(raw.chunk_seconds, raw.words_per_chunk)
    }
}

impl<T: Seconds> ChunkPlan<T> {
    pub fn new(chunk_seconds: T, words_per_chunk: usize) -> Result<Self, ChunkPlanError> {
        if !(chunk_seconds > T::zero()) {
            return Err(ChunkPlanError("chunk_seconds must be positive"));
        }
        if words_per_chunk == 0 {
            return Err(ChunkPlanError("words_per_chunk must be positive"));
        }
        Ok(ChunkPlan { chunk_seconds, words_per_chunk })
    }

    pub fn chunk_seconds(&self) -> T {
        self.chunk_seconds
    }

    pub fn words_per_chunk(&self) -> usize {
        self.words_per_chunk
    }
}

impl Default for ChunkPlan<f64> {
    fn default() -> Self {
        ChunkPlan { chunk_seconds: DEFAULT_CHUNK_SECONDS, words_per_chunk: DEFAULT_WORDS_PER_CHUNK }
    }
}

/// Consecutive windows `[i*T, (i+1)*T)` covering `[0, duration]`; the last
/// one may be shorter.
pub fn audio_chunks(duration_s: f64, plan: &ChunkPlan) -> Vec<AudioChunk> {
    if !(duration_s > 0.0) {
        return Vec::new();
    }
    let t = plan.chunk_seconds();
    let n = (duration_s / t).ceil() as u64;
    (0..n)
        .map(|i| AudioChunk {
            seq: i,
            start_s: i as f64 * t,
            end_s: ((i + 1) as f64 * t).min(duration_s),
        })
        .collect()
}

/// Re-cuts a transcript into fixed windows.
///
/// Each source segment goes, whole, to the window containing its midpoint;
/// a window's text is its segments' texts in source order. Windows with no
/// segments are still emitted, with empty text.
pub fn chunk_timed_stream(segments: &[TimedSegment], plan: &ChunkPlan) -> Vec<TimedSegment> {
    let duration = segments.iter().map(|s| s.end_s).fold(0.0, f64::max);
    let windows = audio_chunks(duration, plan);
    let mut texts: Vec<Vec<&str>> = vec![Vec::new(); windows.len()];
    for s in segments {
        let idx = ((s.midpoint() / plan.chunk_seconds()).floor() as usize).min(windows.len() - 1);
        let text = s.text.trim();
        if !text.is_empty() {
            texts[idx].push(text);
        }
    }
    windows
        .into_iter()
        .zip(texts)
        .map(|(w, t)| TimedSegment::new(w.seq, w.start_s, w.end_s, t.join(" ")))
        .collect()
}

/// Groups whitespace tokens into runs of `words_per_chunk`.
pub fn chunk_words<T: Seconds>(text: &str, plan: &ChunkPlan<T>) -> Vec<String> {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .chunks(plan.words_per_chunk())
        .map(|c| c.join(" "))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plan() -> ChunkPlan {
        ChunkPlan::default()
    }

    #[test]
    fn twelve_seconds_three_windows() {
        let src = vec![TimedSegment::new(0, 0.0, 12.0, "long")];
        let chunks = chunk_timed_stream(&src, &plan());
        let bounds: Vec<_> = chunks.iter().map(|c| (c.start_s, c.end_s)).collect();
        assert_eq!(bounds, vec![(0.0, 5.0), (5.0, 10.0), (10.0, 12.0)]);
        assert_eq!(chunks[1].text, "long");
        assert!(chunk_timed_stream(&[], &plan()).is_empty());
    }

    #[test]
    fn midpoint_assignment() {
        let src = vec![TimedSegment::new(0, 4.8, 5.0, "a"), TimedSegment::new(1, 5.0, 5.2, "b")];
        let chunks = chunk_timed_stream(&src, &plan());
        assert_eq!(chunks[0].text, "a");
        assert_eq!(chunks[1].text, "b");
    }

    #[test]
    fn word_chunks() {
        let sixteen = (0..16).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let sizes: Vec<_> = chunk_words(&sixteen, &plan()).iter().map(|c| c.split(' ').count()).collect();
        assert_eq!(sizes, vec![7, 7, 2]);
        assert!(chunk_words("", &plan()).is_empty());
        let clue = "i am a property of a periodic propagating disturbance";
        let sizes: Vec<_> = chunk_words(clue, &plan()).iter().map(|c| c.split(' ').count()).collect();
        assert_eq!(sizes, vec![7, 2]);
    }

    #[test]
    fn invalid_plans_rejected() {
        assert!(ChunkPlan::new(0.0, 7).is_err());
        assert!(ChunkPlan::new(5.0, 0).is_err());
        assert!(serde_json::from_str::<ChunkPlan>("{\"chunk_seconds\":-1.0,\"words_per_chunk\":7}").is_err());
    }

    proptest! {
        #[test]
        fn words_preserved(words in proptest::collection::vec("[a-z]{1,6}", 0..40), k in 1usize..10) {
            let text = words.join(" ");
            let p = ChunkPlan::new(5.0, k).unwrap();
            let groups = chunk_words(&text, &p);
            prop_assert_eq!(groups.join(" "), text);
            prop_assert!(groups.iter().all(|g| g.split(' ').count() <= k));
        }

        #[test]
        fn stream_text_preserved(durs in proptest::collection::vec((0.1f64..4.0, "[a-z]{1,5}( [a-z]{1,5}){0,3}"), 0..30),
                                 secs in 1.0f64..8.0) {
            let mut t = 0.0;
            let src: Vec<_> = durs.iter().enumerate().map(|(i, (d, txt))| {
                let s = TimedSegment::new(i as u64, t, t + d, txt.clone());
                t += d;
                s
            }).collect();
            let p = ChunkPlan::new(secs, 7).unwrap();
            let chunks = chunk_timed_stream(&src, &p);
            let joined: Vec<_> = chunks.iter().filter(|c| !c.text.is_empty()).map(|c| c.text.as_str()).collect();
            let original: Vec<_> = src.iter().map(|s| s.text.as_str()).collect();
            prop_assert_eq!(joined.join(" "), original.join(" "));
            for w in chunks.windows(2) {
                prop_assert!((w[0].end_s - w[1].start_s).abs() < 1e-12);
                prop_assert!(w[0].seq + 1 == w[1].seq);
            }
            for c in &chunks { prop_assert!(c.start_s < c.end_s); }
        }
    }
}
