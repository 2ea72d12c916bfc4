use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::matching::EvalReport;
use crate::pipeline::TimingReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (json or csv)")),
        }
    }
}

const CSV_HEADER: [&str; 8] = ["riddle_id", "attempted", "answer", "step_index", "em", "fm", "matched_truth", "points"];

/// Serializes a report. Output depends only on the report's contents.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            for r in &report.records {
                // Human-benchmark reports leave fuzzy match undefined.
                let fm = if report.fm_count.is_some() { r.matched.fm.to_string() } else { String::new() };
                w.write_record([
                    r.riddle_id.clone(),
                    r.attempted.to_string(),
                    r.answer.clone().unwrap_or_default(),
                    r.step_index.to_string(),
                    r.matched.em.to_string(),
                    fm,
                    r.matched.matched_truth.clone().unwrap_or_default(),
                    r.points.to_string(),
                ])
                .expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
    }
}

/// Timing as JSON, or CSV with one row per chunk.
pub fn render_timing(report: &TimingReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("timing serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["seq", "arrival_s", "stt_done_s", "qe_done_s", "qa_done_s", "tts_done_s", "completion_s", "lag_s"])
                .expect("in-memory write");
            for c in &report.per_chunk {
                let mut row = vec![c.seq.to_string(), c.arrival_s.to_string()];
                row.extend(c.stage_done_s.iter().map(f64::to_string));
                row.extend([c.completion_s.to_string(), c.lag_s.to_string()]);
                w.write_record(row).expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
    }
}

/// Writes bytes to `path`, creating parent directories.
pub fn write_output(path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), EvalError> {
    let path = path.as_ref();
    let io_err = |source| EvalError::Io { path: path.to_owned(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, bytes).map_err(io_err)
}

/// Writes a report to `path`, creating parent directories.
pub fn emit_report(report: &EvalReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), EvalError> {
    write_output(path, &render_report(report, format))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{OracleQa, WrongAnswers};
    use crate::dataset::RiddleDataset;
    use crate::harness::{eval_all_clues, human_benchmark, synthetic_annotations, synthetic_dataset};
    use crate::matching::aggregate_report;
    use crate::policy::PromptTemplate;

    fn report() -> EvalReport {
        let d = synthetic_dataset(10, 2019, 2);
        eval_all_clues(&d, &OracleQa::new(&d, 2, WrongAnswers::Distinct), &PromptTemplate::default()).unwrap()
    }

    #[test]
    fn timing_csv_rows() {
        use crate::pipeline::{simulate_timing, ChunkPlan, StagePlan};
        let t = simulate_timing(&StagePlan::default(), &ChunkPlan::default(), 3, 0).unwrap();
        let text = String::from_utf8(render_timing(&t, ReportFormat::Csv)).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(2).unwrap().starts_with("1,5,5.9"));
    }

    #[test]
    fn json_round_trips() {
        let r = report();
        let back: EvalReport = serde_json::from_slice(&render_report(&r, ReportFormat::Json)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_report_is_valid() {
        let d = RiddleDataset::new(vec![], "none").unwrap();
        let r = aggregate_report(vec![], &d).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/empty.json");
        emit_report(&r, ReportFormat::Json, &p).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        assert_eq!(v["n_riddles"], 0);
    }

    #[test]
    fn identical_runs_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        for fmt in [ReportFormat::Json, ReportFormat::Csv] {
            let a = dir.path().join("a");
            let b = dir.path().join("b");
            emit_report(&report(), fmt, &a).unwrap();
            emit_report(&report(), fmt, &b).unwrap();
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        }
    }

    #[test]
    fn csv_has_one_row_per_record() {
        let r = report();
        let text = String::from_utf8(render_report(&r, ReportFormat::Csv)).unwrap();
        assert_eq!(text.lines().count(), r.records.len() + 1);
        assert!(text.starts_with("riddle_id,attempted,answer,step_index,em,fm,matched_truth,points\n"));
        let d = synthetic_dataset(4, 2019, 2);
        let h = human_benchmark(&d, &synthetic_annotations(&d, 2, 0)).unwrap();
        let text = String::from_utf8(render_report(&h, ReportFormat::Csv)).unwrap();
        assert!(text.lines().skip(1).all(|l| l.split(',').nth(5) == Some("")));
    }

    #[test]
    fn percentages_have_two_decimals() {
        let d = synthetic_dataset(3, 2019, 2);
        let h = human_benchmark(&d, &synthetic_annotations(&d, 1, 0)).unwrap();
        let text = String::from_utf8(render_report(&h, ReportFormat::Json)).unwrap();
        assert!(text.contains("\"em_pct\": 33.33"), "{text}");
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_report(&report(), ReportFormat::Json, blocker.join("r.json")).unwrap_err();
        assert!(err.to_string().contains("file"));
    }
}
