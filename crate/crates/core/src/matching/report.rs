use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize, Serializer};

use super::MatchResult;
use crate::dataset::{RiddleDataset, Subject};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("clue number must be >= 1, got {0}")]
    ClueNumber(u32),
    #[error("more than one record for riddle {0:?}")]
    DuplicateRecord(String),
    #[error("record for unknown riddle {0:?}")]
    UnknownRiddle(String),
    #[error("record for {id:?} violates invariants: {reason}")]
    InvalidRecord { id: String, reason: &'static str },
    #[error("serialized report is inconsistent: {0}")]
    Inconsistent(String),
}

/// 5 points on the first clue, 4 on the second, 3 from the third on.
pub fn points_for_clue(clue_number: u32) -> Result<u32, ReportError> {
    match clue_number {
        0 => Err(ReportError::ClueNumber(0)),
        1 => Ok(5),
        2 => Ok(4),
        _ => Ok(3),
    }
}

/// The outcome for one riddle under some protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub riddle_id: String,
    pub attempted: bool,
    pub answer: Option<String>,
    /// Clue or chunk number at which the attempt was made; 0 if none.
    pub step_index: u32,
    #[serde(rename = "match")]
    pub matched: MatchResult,
    pub points: u32,
}

impl AttemptRecord {
    pub fn unattempted(riddle_id: impl Into<String>) -> Self {
        AttemptRecord {
            riddle_id: riddle_id.into(),
            attempted: false,
            answer: None,
            step_index: 0,
            matched: MatchResult::none(),
            points: 0,
        }
    }

    /// An attempt scored on `clue_number`; points only accrue on exact matches.
    pub fn attempt(
        riddle_id: impl Into<String>,
        answer: Option<String>,
        step_index: u32,
        matched: MatchResult,
        clue_number: u32,
    ) -> Result<Self, ReportError> {
        let points = if matched.em { points_for_clue(clue_number)? } else { 0 };
        Ok(AttemptRecord {
            riddle_id: riddle_id.into(),
            attempted: true,
            answer,
            step_index,
            matched,
            points,
        })
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |reason| Err(ReportError::InvalidRecord { id: self.riddle_id.clone(), reason });
        if !self.attempted && (self.answer.is_some() || self.matched.em || self.matched.fm || self.points != 0) {
            return bad("unattempted record carries an answer, a match or points");
        }
        if self.matched.em && !self.matched.fm {
            return bad("exact match without fuzzy match");
        }
        if self.points > 0 && !self.matched.em {
            return bad("points without an exact match");
        }
        if ![0, 3, 4, 5].contains(&self.points) {
            return bad("points outside {0,3,4,5}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub n_riddles: usize,
    pub em_count: usize,
    pub fm_count: Option<usize>,
    #[serde(serialize_with = "round2")]
    pub em_pct: f64,
    #[serde(serialize_with = "round2_opt")]
    pub fm_pct: Option<f64>,
}

/// Aggregate accuracy over a whole dataset.
///
/// Percentages use every riddle as the denominator, attempted or not.
/// Internal values are unrounded; JSON output carries two decimals and
/// deserialization recomputes the exact values from the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReportWire")]
pub struct EvalReport {
    pub n_riddles: usize,
    pub n_attempted: usize,
    pub em_count: usize,
    /// `None` when fuzzy match is not defined for the protocol (human benchmark).
    pub fm_count: Option<usize>,
    #[serde(serialize_with = "round2")]
    pub em_pct: f64,
    #[serde(serialize_with = "round2_opt")]
    pub fm_pct: Option<f64>,
    pub total_points: u32,
    pub per_subject: BTreeMap<Subject, SubjectScore>,
    pub records: Vec<AttemptRecord>,
}

#[derive(Deserialize)]
struct ReportWire {
    n_riddles: usize,
    n_attempted: usize,
    em_count: usize,
    fm_count: Option<usize>,
    em_pct: f64,
    fm_pct: Option<f64>,
    total_points: u32,
    per_subject: BTreeMap<Subject, SubjectScore>,
    records: Vec<AttemptRecord>,
}

pub(crate) fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

fn rounded(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn round2<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(rounded(*v))
}

fn round2_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&rounded(*v)),
        None => s.serialize_none(),
    }
}

fn check_pct(name: &str, stated: f64, exact: f64) -> Result<(), ReportError> {
    if (rounded(exact) - stated).abs() > 1e-9 {
        return Err(ReportError::Inconsistent(format!("{name} {stated} does not match counts ({exact})")));
    }
    Ok(())
}

impl TryFrom<ReportWire> for EvalReport {
    type Error = ReportError;

    fn try_from(w: ReportWire) -> Result<Self, Self::Error> {
        let em_pct = percent(w.em_count, w.n_riddles);
        check_pct("em_pct", w.em_pct, em_pct)?;
        let fm_pct = w.fm_count.map(|c| percent(c, w.n_riddles));
        match (w.fm_pct, fm_pct) {
            (Some(stated), Some(exact)) => check_pct("fm_pct", stated, exact)?,
            (None, None) => {}
            _ => return Err(ReportError::Inconsistent("fm_pct and fm_count disagree".into())),
        }
        let per_subject = w
            .per_subject
            .into_iter()
            .map(|(subject, s)| {
                let em_pct = percent(s.em_count, s.n_riddles);
                check_pct("subject em_pct", s.em_pct, em_pct)?;
                let fm_pct = s.fm_count.map(|c| percent(c, s.n_riddles));
                Ok((subject, SubjectScore { em_pct, fm_pct, ..s }))
            })
            .collect::<Result<_, ReportError>>()?;
        for r in &w.records {
            r.validate()?;
        }
        Ok(EvalReport {
            n_riddles: w.n_riddles,
            n_attempted: w.n_attempted,
            em_count: w.em_count,
            fm_count: w.fm_count,
            em_pct,
            fm_pct,
            total_points: w.total_points,
            per_subject,
            records: w.records,
        })
    }
}

/// Builds a report over every riddle in `dataset`.
///
/// Riddles without a record are filled in as unattempted. Records come out
/// sorted by riddle id so the input order cannot affect the report.
pub fn aggregate_report(records: Vec<AttemptRecord>, dataset: &RiddleDataset) -> Result<EvalReport, ReportError> {
    aggregate(records, dataset, true)
}

pub(crate) fn aggregate(
    records: Vec<AttemptRecord>,
    dataset: &RiddleDataset,
    fm_defined: bool,
) -> Result<EvalReport, ReportError> {
    let index = dataset.index_by_id();
    let mut seen = BTreeSet::new();
    for r in &records {
        if !index.contains_key(r.riddle_id.as_str()) {
            return Err(ReportError::UnknownRiddle(r.riddle_id.clone()));
        }
        if !seen.insert(r.riddle_id.clone()) {
            return Err(ReportError::DuplicateRecord(r.riddle_id.clone()));
        }
        r.validate()?;
    }
    let mut records = records;
    for riddle in &dataset.riddles {
        if !seen.contains(&riddle.id) {
            records.push(AttemptRecord::unattempted(riddle.id.clone()));
        }
    }
    records.sort_by(|a, b| a.riddle_id.cmp(&b.riddle_id));

    let n = records.len();
    let em_count = records.iter().filter(|r| r.matched.em).count();
    let fm_count = records.iter().filter(|r| r.matched.fm).count();

    let mut by_subject: BTreeMap<Subject, (usize, usize, usize)> = BTreeMap::new();
    for r in &records {
        if let Some(subject) = index[r.riddle_id.as_str()].subject {
            let e = by_subject.entry(subject).or_default();
            e.0 += 1;
            e.1 += usize::from(r.matched.em);
            e.2 += usize::from(r.matched.fm);
        }
    }
    let per_subject = by_subject
        .into_iter()
        .map(|(s, (n, em, fm))| {
            let fm_count = fm_defined.then_some(fm);
            (
                s,
                SubjectScore {
                    n_riddles: n,
                    em_count: em,
                    fm_count,
                    em_pct: percent(em, n),
                    fm_pct: fm_count.map(|c| percent(c, n)),
                },
            )
        })
        .collect();

    let fm_count = fm_defined.then_some(fm_count);
    Ok(EvalReport {
        n_riddles: n,
        n_attempted: records.iter().filter(|r| r.attempted).count(),
        em_count,
        fm_count,
        em_pct: percent(em_count, n),
        fm_pct: fm_count.map(|c| percent(c, n)),
        total_points: records.iter().map(|r| r.points).sum(),
        per_subject,
        records,
    })
}
