//! Offline evaluation protocols over a riddle dataset, report emission, and
//! reproducible synthetic inputs.
//!
//! - all-clues: every clue at once, one sample, no voting.
//! - mock-live: growing input (word chunks or whole clues) through the
//!   voting policy, as the live chain would see it.
//! - human benchmark: annotated best-team performance.

mod emit;
mod live;
mod synthetic;

use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use emit::{emit_report, render_report, render_timing, write_output, ReportFormat};
pub use live::{live_debut_scenario, run_live, run_live_scenario, score_live_attempts, LiveScenario, LiveScenarioRun};
pub use synthetic::{synthetic_annotations, synthetic_dataset, SYNTHETIC_CONTEST};

use crate::adapters::{LineJsonQa, OracleQa, ConstantQa, ReplayError, WrongAnswers};
use crate::dataset::{normalize_answer, DatasetError, HumanAnnotation, RiddleDataset};
use crate::matching::{aggregate, match_answer, AttemptRecord, EvalReport, MatchResult, ReportError};
use crate::pipeline::{chunk_words, ChunkPlan, ChunkPlanError, PipelineError, TimingError};
use crate::policy::{
    run_policy, sample_step, PolicyError, PromptTemplate, VoteSettings, DEFAULT_SAMPLES_PER_STEP, DEFAULT_THRESHOLD,
};
use crate::ports::QaPort;
use crate::segmentation::SegmentationError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Chunk(#[from] ChunkPlanError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("dataset has no riddles")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("annotation for {riddle_id:?}: {reason}")]
    Annotation { riddle_id: String, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("QA backend: {0}")]
    Backend(String),
}

impl From<crate::config::ConfigError> for EvalError {
    fn from(e: crate::config::ConfigError) -> Self {
        match e {
            crate::config::ConfigError::Io { path, source } => EvalError::Io { path, source },
            other => EvalError::Config(other.to_string()),
        }
    }
}

impl EvalError {
    /// 1 for invalid input or configuration, 2 for a failing backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvalError::Backend(_) | EvalError::Pipeline(PipelineError::Aborted { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    AllClues,
    MockLive,
}

/// What one mock-live step adds to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteGranularity {
    #[default]
    PerChunk,
    PerClue,
}

/// Which QA port an evaluation talks to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum QaBackend {
    /// Dataset-aware mock, wrong until `reveal_after_clue`.
    Oracle {
        #[serde(default = "one")]
        reveal_after_clue: u32,
        #[serde(default)]
        wrong: WrongAnswers,
    },
    Constant { answer: String },
    /// Child process speaking line-delimited JSON on stdio.
    Process {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
    /// Server speaking line-delimited JSON on a Unix socket.
    Socket { path: PathBuf },
}

fn one() -> u32 {
    1
}

impl Default for QaBackend {
    fn default() -> Self {
        QaBackend::Oracle { reveal_after_clue: 1, wrong: WrongAnswers::Distinct }
    }
}

impl QaBackend {
    pub fn build(&self, dataset: &RiddleDataset) -> Result<Box<dyn QaPort>, EvalError> {
        Ok(match self {
            QaBackend::Oracle { reveal_after_clue, wrong } => Box::new(OracleQa::new(dataset, *reveal_after_clue, *wrong)),
            QaBackend::Constant { answer } => Box::new(ConstantQa::new(answer.clone())),
            QaBackend::Process { program, args } => Box::new(
                LineJsonQa::spawn(program, args).map_err(|e| EvalError::Backend(format!("spawning {program}: {e}")))?,
            ),
            QaBackend::Socket { path } => Box::new(
                LineJsonQa::connect(path).map_err(|e| EvalError::Backend(format!("connecting {}: {e}", path.display())))?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub threshold: u32,
    pub samples_per_step: usize,
    /// Only the word count matters here; mock-live ignores chunk seconds.
    pub chunking: ChunkPlan,
    pub vote_granularity: VoteGranularity,
    pub seed: u64,
    /// Normalize clue text before it reaches the QA port.
    pub normalize_clues: bool,
    pub qa_backend: QaBackend,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: Protocol::AllClues,
            threshold: DEFAULT_THRESHOLD,
            samples_per_step: DEFAULT_SAMPLES_PER_STEP,
            chunking: ChunkPlan::default(),
            vote_granularity: VoteGranularity::PerChunk,
            seed: 0,
            normalize_clues: false,
            qa_backend: QaBackend::default(),
        }
    }
}

impl EvalConfig {
    pub fn mock_live() -> Self {
        EvalConfig { protocol: Protocol::MockLive, ..Default::default() }
    }

    pub fn vote_settings(&self) -> VoteSettings {
        VoteSettings::new(self.threshold, self.samples_per_step)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        self.vote_settings().fresh_state()?;
        Ok(())
    }
}

/// Counts QA calls so an evaluation whose every call failed is reported as a
/// backend failure rather than a 0% score.
#[derive(Default)]
struct CallStats {
    calls: usize,
    failures: usize,
    last_error: Option<String>,
}

impl CallStats {
    fn check(self) -> Result<(), EvalError> {
        if self.calls > 0 && self.failures == self.calls {
            return Err(EvalError::Backend(format!(
                "all {} QA calls failed; last error: {}",
                self.calls,
                self.last_error.unwrap_or_default()
            )));
        }
        Ok(())
    }
}

fn require_nonempty(dataset: &RiddleDataset) -> Result<(), EvalError> {
    if dataset.is_empty() {
        Err(EvalError::EmptyDataset)
    } else {
        Ok(())
    }
}

fn clue_texts(clues: &[String], normalize: bool) -> Vec<String> {
    if normalize {
        clues.iter().map(|c| normalize_answer(c)).collect()
    } else {
        clues.to_vec()
    }
}

/// All clues concatenated, one answer per riddle.
pub fn eval_all_clues(
    dataset: &RiddleDataset,
    qa: &dyn QaPort,
    template: &PromptTemplate,
) -> Result<EvalReport, EvalError> {
    all_clues(dataset, qa, template, false)
}

fn all_clues(
    dataset: &RiddleDataset,
    qa: &dyn QaPort,
    template: &PromptTemplate,
    normalize: bool,
) -> Result<EvalReport, EvalError> {
    require_nonempty(dataset)?;
    template.validate()?;
    let mut stats = CallStats::default();
    let mut records = Vec::with_capacity(dataset.len());
    for riddle in &dataset.riddles {
        let clues = clue_texts(&riddle.clues, normalize);
        let n = clues.len() as u32;
        stats.calls += 1;
        match sample_step(qa, &clues, template, 1)? {
            Ok(samples) => {
                let answer = samples.candidates.into_iter().next().expect("one sample");
                let matched = match_answer(&answer, riddle);
                records.push(AttemptRecord::attempt(riddle.id.clone(), Some(answer), n, matched, n)?);
            }
            Err(e) => {
                log::warn!("riddle {}: QA failed, scored unattempted: {e}", riddle.id);
                stats.failures += 1;
                stats.last_error = Some(e.to_string());
                records.push(AttemptRecord::unattempted(riddle.id.clone()));
            }
        }
    }
    stats.check()?;
    Ok(aggregate(records, dataset, true)?)
}

/// Mock-live steps for one riddle, each with the clue holding its last word.
fn live_steps(clues: &[String], config: &EvalConfig) -> Vec<(String, u32)> {
    match config.vote_granularity {
        VoteGranularity::PerClue => clues.iter().enumerate().map(|(i, c)| (c.clone(), i as u32 + 1)).collect(),
        VoteGranularity::PerChunk => {
            let mut clue_of_word = Vec::new();
            let mut words = Vec::new();
            for (i, c) in clues.iter().enumerate() {
                for w in c.split_whitespace() {
                    words.push(w);
                    clue_of_word.push(i as u32 + 1);
                }
            }
            let mut consumed = 0;
            chunk_words(&words.join(" "), &config.chunking)
                .into_iter()
                .map(|chunk| {
                    consumed += chunk.split_whitespace().count();
                    (chunk, clue_of_word[consumed - 1])
                })
                .collect()
        }
    }
}

/// Feeds each riddle step by step through the voting policy.
pub fn eval_mock_live(
    dataset: &RiddleDataset,
    qa: &dyn QaPort,
    config: &EvalConfig,
    template: &PromptTemplate,
) -> Result<EvalReport, EvalError> {
    if config.protocol != Protocol::MockLive {
        return Err(EvalError::Config("eval_mock_live needs protocol = mock_live".into()));
    }
    require_nonempty(dataset)?;
    config.validate()?;
    template.validate()?;
    let mut stats = CallStats::default();
    let mut records = Vec::with_capacity(dataset.len());
    for riddle in &dataset.riddles {
        let steps = live_steps(&clue_texts(&riddle.clues, config.normalize_clues), config);
        if steps.is_empty() {
            records.push(AttemptRecord::unattempted(riddle.id.clone()));
            continue;
        }
        let pieces: Vec<&str> = steps.iter().map(|(p, _)| p.as_str()).collect();
        let outcome = run_policy(&pieces, qa, config.vote_settings(), template)?;
        stats.calls += outcome.steps_run as usize;
        stats.failures += outcome.failed_steps.len();
        if let Some((_, e)) = outcome.failed_steps.last() {
            stats.last_error = Some(e.to_string());
        }
        let record = match outcome.answer {
            Some(answer) if outcome.attempted => {
                let clue_number = steps[outcome.step_index as usize - 1].1;
                let matched = match_answer(&answer, riddle);
                AttemptRecord::attempt(riddle.id.clone(), Some(answer), outcome.step_index, matched, clue_number)?
            }
            _ => AttemptRecord::unattempted(riddle.id.clone()),
        };
        records.push(record);
    }
    stats.check()?;
    Ok(aggregate(records, dataset, true)?)
}

/// Runs whichever protocol `config` selects, building the QA port from its backend.
pub fn evaluate(dataset: &RiddleDataset, config: &EvalConfig, template: &PromptTemplate) -> Result<EvalReport, EvalError> {
    let qa = config.qa_backend.build(dataset)?;
    match config.protocol {
        Protocol::AllClues => all_clues(dataset, qa.as_ref(), template, config.normalize_clues),
        Protocol::MockLive => eval_mock_live(dataset, qa.as_ref(), config, template),
    }
}

/// Scores annotated human performance. Fuzzy match is not defined here.
///
/// Riddles without an annotation count as unanswered.
pub fn human_benchmark(dataset: &RiddleDataset, annotations: &[HumanAnnotation]) -> Result<EvalReport, EvalError> {
    let index = dataset.index_by_id();
    let mut by_id: BTreeMap<&str, &HumanAnnotation> = BTreeMap::new();
    for (row, a) in annotations.iter().enumerate() {
        a.validate(row + 1)?;
        let bad = |reason: &str| EvalError::Annotation { riddle_id: a.riddle_id.clone(), reason: reason.to_owned() };
        let Some(riddle) = index.get(a.riddle_id.as_str()) else {
            return Err(bad("riddle not in dataset"));
        };
        if by_id.insert(a.riddle_id.as_str(), a).is_some() {
            return Err(bad("more than one annotation"));
        }
        if let Some(k) = a.clue_number {
            if k as usize > riddle.clues.len() {
                return Err(bad(&format!("clue {k} but the riddle has {} clues", riddle.clues.len())));
            }
        }
    }
    let missing = dataset.riddles.iter().filter(|r| !by_id.contains_key(r.id.as_str())).count();
    if missing > 0 {
        log::warn!("{missing} riddles have no annotation; counted as unanswered");
    }
    let records = by_id
        .values()
        .map(|a| match (a.answered, a.clue_number) {
            (true, Some(k)) => {
                let matched = if a.correct {
                    MatchResult { em: true, fm: true, matched_truth: Some(index[a.riddle_id.as_str()].answer.clone()) }
                } else {
                    MatchResult::none()
                };
                AttemptRecord::attempt(a.riddle_id.clone(), None, k, matched, k)
            }
            _ => Ok(AttemptRecord::unattempted(a.riddle_id.clone())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(records, dataset, false)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{FreshQa, ScriptedQa};
    use crate::dataset::Riddle;
    use crate::ports::{PortError, PortKind, QaQuery};
    use proptest::prelude::*;

    fn riddle(id: &str, clues: &[&str], answer: &str) -> Riddle {
        Riddle {
            id: id.into(),
            year: 2019,
            contest: String::new(),
            subject: None,
            clues: clues.iter().map(|s| s.to_string()).collect(),
            answer: answer.into(),
            alt_answers: vec![],
        }
    }

    fn ds() -> RiddleDataset {
        synthetic_dataset(12, 2019, 1)
    }

    struct Truth<'a>(&'a RiddleDataset, usize);

    impl QaPort for Truth<'_> {
        fn answer(&self, q: &QaQuery<'_>) -> Result<Vec<String>, PortError> {
            let oracle = OracleQa::perfect(self.0);
            let (id, _) = oracle.locate(q.input_text).ok_or_else(|| PortError::new(PortKind::Qa, "lost"))?;
            let r = self.0.get(id).unwrap();
            Ok(vec![r.answer.clone(); self.1.max(q.n_samples)].into_iter().take(q.n_samples).collect())
        }
    }

    #[test]
    fn perfect_and_constant_backends() {
        let d = ds();
        let t = PromptTemplate::default();
        let r = eval_all_clues(&d, &OracleQa::perfect(&d), &t).unwrap();
        assert_eq!((r.em_pct, r.fm_pct), (100.0, Some(100.0)));
        assert!(r.records.iter().all(|x| x.step_index == d.get(&x.riddle_id).unwrap().clues.len() as u32));
        let r = eval_all_clues(&d, &ConstantQa::new("unknown"), &t).unwrap();
        assert_eq!((r.em_pct, r.fm_pct), (0.0, Some(0.0)));
    }

    #[test]
    fn all_clues_counts_partial_oracle() {
        let d = synthetic_dataset(156, 2019, 3);
        // Correct only on the first 43 riddles.
        struct Partial(RiddleDataset);
        impl QaPort for Partial {
            fn answer(&self, q: &QaQuery<'_>) -> Result<Vec<String>, PortError> {
                let o = OracleQa::perfect(&self.0);
                let (id, _) = o.locate(q.input_text).unwrap();
                let pos = self.0.riddles.iter().position(|r| r.id == id).unwrap();
                let a = if pos < 43 { self.0.riddles[pos].answer.clone() } else { "unknown".into() };
                Ok(vec![a; q.n_samples])
            }
        }
        let r = eval_all_clues(&d, &Partial(d.clone()), &PromptTemplate::default()).unwrap();
        assert_eq!(r.em_count, 43);
        assert!((r.em_pct - 27.56).abs() < 0.005);
    }

    #[test]
    fn mock_live_truth_from_step_one() {
        let d = ds();
        let report = eval_mock_live(&d, &Truth(&d, 3), &EvalConfig::mock_live(), &PromptTemplate::default()).unwrap();
        assert_eq!(report.em_pct, 100.0);
        let config = EvalConfig::mock_live();
        for r in &report.records {
            let clue = live_steps(&d.get(&r.riddle_id).unwrap().clues, &config)[0].1;
            assert_eq!(r.step_index, 1);
            assert_eq!(r.points, crate::matching::points_for_clue(clue).unwrap());
        }
    }

    #[test]
    fn mock_live_fresh_strings_never_attempt() {
        let d = ds();
        let config = EvalConfig { threshold: 2, ..EvalConfig::mock_live() };
        let report = eval_mock_live(&d, &FreshQa::default(), &config, &PromptTemplate::default()).unwrap();
        assert_eq!((report.n_attempted, report.em_pct), (0, 0.0));
    }

    #[test]
    fn mock_live_requires_protocol() {
        let d = ds();
        let err = eval_mock_live(&d, &FreshQa::default(), &EvalConfig::default(), &PromptTemplate::default());
        assert!(matches!(err, Err(EvalError::Config(_))));
    }

    #[test]
    fn delayed_oracle_loses_under_mock_live() {
        let d = synthetic_dataset(20, 2020, 9);
        let qa = OracleQa::new(&d, 3, WrongAnswers::Consistent);
        let t = PromptTemplate::default();
        let all = eval_all_clues(&d, &qa, &t).unwrap();
        let live = eval_mock_live(&d, &qa, &EvalConfig::mock_live(), &t).unwrap();
        assert!(live.em_pct <= all.em_pct);
        assert!(live.em_pct < 100.0 && all.em_pct == 100.0);
    }

    #[test]
    fn points_follow_clue_of_last_word() {
        let d = RiddleDataset::new(
            vec![riddle("x", &["one two three four five", "six seven eight", "nine ten"], "zeta")],
            "mem",
        )
        .unwrap();
        let config = EvalConfig { chunking: ChunkPlan::new(5.0, 4).unwrap(), ..EvalConfig::mock_live() };
        let steps = live_steps(&d.riddles[0].clues, &config);
        let clue_of: Vec<u32> = steps.iter().map(|s| s.1).collect();
        assert_eq!(clue_of, [1, 2, 3]);
        // Truth appears only at step 2, whose last word ("eight") is in clue 2.
        let mut script: Vec<Result<Vec<String>, String>> = vec![Ok(vec!["a1".into(), "a2".into(), "a3".into()])];
        script.push(Ok(vec!["zeta".into(); 3]));
        let r = eval_mock_live(&d, &ScriptedQa::new(script), &config, &PromptTemplate::default()).unwrap();
        assert_eq!((r.records[0].step_index, r.records[0].points), (2, 4));
    }

    #[test]
    fn dead_backend_is_a_backend_error() {
        let d = ds();
        let err = eval_all_clues(&d, &ScriptedQa::new(vec![]), &PromptTemplate::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let d2 = RiddleDataset::new(d.riddles[..2].to_vec(), "mem").unwrap();
        let partial = ScriptedQa::new(vec![Err("blip".into()), Ok(vec!["x".into()])]);
        let r = eval_all_clues(&d2, &partial, &PromptTemplate::default()).unwrap();
        assert_eq!(r.n_attempted, 1);
        assert_eq!(eval_all_clues(&RiddleDataset::new(vec![], "e").unwrap(), &partial, &PromptTemplate::default())
            .unwrap_err()
            .exit_code(), 1);
    }

    #[test]
    fn human_benchmark_matches_published_rates() {
        for (n, correct, pct) in [(156, 119, 76.3), (160, 120, 75.0)] {
            let d = synthetic_dataset(n, 2019, 5);
            let ann = synthetic_annotations(&d, correct, 11);
            let r = human_benchmark(&d, &ann).unwrap();
            assert_eq!(r.em_count, correct);
            assert!((r.em_pct - pct).abs() <= 0.05, "{}", r.em_pct);
            assert_eq!((r.fm_count, r.fm_pct), (None, None));
        }
    }

    #[test]
    fn human_benchmark_points_and_errors() {
        let d = RiddleDataset::new(vec![riddle("a", &["c1", "c2"], "x"), riddle("b", &["c1"], "y")], "mem").unwrap();
        let ann = |id: &str, k: Option<u32>, correct| HumanAnnotation {
            riddle_id: id.into(),
            answered: k.is_some(),
            clue_number: k,
            correct,
        };
        let r = human_benchmark(&d, &[ann("a", Some(1), true)]).unwrap();
        assert_eq!((r.total_points, r.em_count, r.n_riddles), (5, 1, 2));
        assert!(human_benchmark(&d, &[ann("a", Some(1), true), ann("a", None, false)]).is_err());
        assert!(human_benchmark(&d, &[ann("zzz", None, false)]).is_err());
        assert!(human_benchmark(&d, &[ann("b", Some(2), true)]).is_err());
        let r = human_benchmark(&d, &[ann("a", Some(2), false)]).unwrap();
        assert_eq!((r.em_count, r.n_attempted, r.total_points), (0, 1, 0));
    }

    proptest! {
        #[test]
        fn single_chunk_per_clue_equals_per_clue(seed in 0u64..500, k in 1usize..6) {
            // Clues of exactly k words make word chunks coincide with clues.
            let clues: Vec<String> = (0..4)
                .map(|c| (0..k).map(|w| format!("w{}x{}x{}", seed, c, w)).collect::<Vec<_>>().join(" "))
                .collect();
            let refs: Vec<&str> = clues.iter().map(String::as_str).collect();
            let d = RiddleDataset::new(vec![riddle("r", &refs, "omega")], "mem").unwrap();
            let qa = OracleQa::new(&d, (seed % 5) as u32, WrongAnswers::Consistent);
            let per_chunk = EvalConfig { chunking: ChunkPlan::new(5.0, k).unwrap(), ..EvalConfig::mock_live() };
            let per_clue = EvalConfig { vote_granularity: VoteGranularity::PerClue, ..per_chunk.clone() };
            let t = PromptTemplate::default();
            prop_assert_eq!(eval_mock_live(&d, &qa, &per_chunk, &t).unwrap(), eval_mock_live(&d, &qa, &per_clue, &t).unwrap());
        }

        #[test]
        fn one_record_per_riddle(n in 1usize..30, seed: u64, reveal in 1u32..5, consistent: bool) {
            let d = synthetic_dataset(n, 2019, seed);
            let wrong = if consistent { WrongAnswers::Consistent } else { WrongAnswers::Distinct };
            let qa = OracleQa::new(&d, reveal, wrong);
            let t = PromptTemplate::default();
            for r in [eval_all_clues(&d, &qa, &t).unwrap(), eval_mock_live(&d, &qa, &EvalConfig::mock_live(), &t).unwrap()] {
                let ids: Vec<&str> = r.records.iter().map(|x| x.riddle_id.as_str()).collect();
                let mut expected: Vec<&str> = d.riddles.iter().map(|x| x.id.as_str()).collect();
                expected.sort();
                prop_assert_eq!(ids, expected);
            }
        }

        #[test]
        fn human_em_equals_brute_force(n in 1usize..60, frac in 0.0f64..1.0, seed: u64) {
            let d = synthetic_dataset(n, 2020, seed);
            let correct = ((n as f64) * frac) as usize;
            let ann = synthetic_annotations(&d, correct, seed);
            let brute = ann.iter().filter(|a| a.correct).count() as f64 * 100.0 / n as f64;
            let r = human_benchmark(&d, &ann).unwrap();
            prop_assert!((r.em_pct - brute).abs() < 1e-9);
        }
    }
}
