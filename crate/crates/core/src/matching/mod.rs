//! Answer comparison, word error rate and clue-indexed scoring.

mod report;
mod wer;

use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_answer, Riddle};

pub use report::{
    aggregate_report, points_for_clue, AttemptRecord, EvalReport, ReportError, SubjectScore,
};
pub(crate) use report::aggregate;
pub use wer::{word_edit_distance, word_error_rate, MetricError};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub em: bool,
    pub fm: bool,
    /// The ground-truth string that matched, exact match taking precedence.
    pub matched_truth: Option<String>,
}

impl MatchResult {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Normalized candidate equals some normalized truth. A candidate that
/// normalizes to nothing never matches.
pub fn exact_match(candidate: &str, riddle: &Riddle) -> bool {
    let cand = normalize_answer(candidate);
    !cand.is_empty() && riddle.truths().any(|t| normalize_answer(t) == cand)
}

/// Some normalized truth is a substring of the normalized candidate.
/// Truths that normalize to the empty string never match.
pub fn fuzzy_match(candidate: &str, riddle: &Riddle) -> bool {
    let cand = normalize_answer(candidate);
    riddle.truths().any(|t| {
        let t = normalize_answer(t);
        !t.is_empty() && cand.contains(&t)
    })
}

/// Both metrics at once, recording which truth matched.
pub fn match_answer(candidate: &str, riddle: &Riddle) -> MatchResult {
    let cand = normalize_answer(candidate);
    let truths: Vec<(&str, String)> = riddle.truths().map(|t| (t, normalize_answer(t))).collect();
    if !cand.is_empty() {
        if let Some((raw, _)) = truths.iter().find(|(_, n)| *n == cand) {
            return MatchResult { em: true, fm: true, matched_truth: Some((*raw).to_owned()) };
        }
    }
    match truths.iter().find(|(_, n)| !n.is_empty() && cand.contains(n.as_str())) {
        Some((raw, _)) => MatchResult { em: false, fm: true, matched_truth: Some((*raw).to_owned()) },
        None => MatchResult::none(),
    }
}
