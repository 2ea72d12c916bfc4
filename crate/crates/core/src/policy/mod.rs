//! Answering policy: prompt construction and confidence voting over
//! repeated QA samples.
//!
//! For each input step the QA port is asked for `samples_per_step` answers.
//! Normalized answers are tallied across steps and the policy attempts the
//! first answer whose tally reaches the threshold.

mod prompt;
mod vote;

use serde::{Deserialize, Serialize};

pub use prompt::{build_prompt, FewShotExample, PromptTemplate};
pub use vote::{vote_step, QaSampleSet, VoteState};

use crate::ports::{PortError, QaPort, QaQuery};

pub const DEFAULT_THRESHOLD: u32 = 3;
pub const DEFAULT_SAMPLES_PER_STEP: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy already attempted an answer for this riddle")]
    AlreadyAttempted,
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("no input to answer from")]
    NoInput,
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("invalid policy config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteSettings {
    /// Tally an answer must reach before it is attempted. Live behaviour is
    /// very sensitive to this value.
    pub threshold: u32,
    pub samples_per_step: usize,
}

impl Default for VoteSettings {
    fn default() -> Self {
        VoteSettings { threshold: DEFAULT_THRESHOLD, samples_per_step: DEFAULT_SAMPLES_PER_STEP }
    }
}

impl VoteSettings {
    pub fn new(threshold: u32, samples_per_step: usize) -> Self {
        VoteSettings { threshold, samples_per_step }
    }

    pub fn fresh_state(&self) -> Result<VoteState, PolicyError> {
        VoteState::new(self.threshold, self.samples_per_step)
    }
}

/// Asks the QA port for one step of samples, validating the sample count.
pub fn sample_step(
    qa: &dyn QaPort,
    pieces: &[impl AsRef<str>],
    template: &PromptTemplate,
    n_samples: usize,
) -> Result<Result<QaSampleSet, PortError>, PolicyError> {
    let input_text = pieces.iter().map(|p| p.as_ref().trim()).collect::<Vec<_>>().join(" ");
    let prompt = build_prompt(pieces, template)?;
    let query = QaQuery { input_text: &input_text, prompt: &prompt, n_samples };
    Ok(qa.answer(&query).and_then(|candidates| {
        if candidates.len() == n_samples {
            Ok(QaSampleSet { input_text: input_text.clone(), candidates })
        } else {
            Err(PortError::new(
                crate::ports::PortKind::Qa,
                format!("expected {n_samples} answers, got {}", candidates.len()),
            ))
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub attempted: bool,
    pub answer: Option<String>,
    /// 1-based step of the attempt, 0 when no attempt was made.
    pub step_index: u32,
    pub steps_run: u32,
    /// Steps whose QA call failed; they contributed no votes.
    pub failed_steps: Vec<(u32, PortError)>,
    pub final_state: VoteState,
}

/// Feeds growing input to the QA port until an answer reaches the threshold.
///
/// `pieces` are the increments (clues or word chunks); step `i` sees the
/// first `i` pieces. A failing QA call costs the step its votes but does not
/// stop the policy.
pub fn run_policy<S: AsRef<str>>(
    pieces: &[S],
    qa: &dyn QaPort,
    settings: VoteSettings,
    template: &PromptTemplate,
) -> Result<PolicyOutcome, PolicyError> {
    if pieces.is_empty() {
        return Err(PolicyError::NoInput);
    }
    template.validate()?;
    let mut state = settings.fresh_state()?;
    let mut failed_steps = Vec::new();
    for step in 1..=pieces.len() {
        let n = step as u32;
        match sample_step(qa, &pieces[..step], template, settings.samples_per_step)? {
            Ok(samples) => {
                if let Some(answer) = state.step(&samples)? {
                    return Ok(PolicyOutcome {
                        attempted: true,
                        answer: Some(answer),
                        step_index: n,
                        steps_run: n,
                        failed_steps,
                        final_state: state,
                    });
                }
            }
            Err(e) => {
                log::warn!("QA failed on step {step}: {e}");
                state.skip_step()?;
                failed_steps.push((n, e));
            }
        }
    }
    Ok(PolicyOutcome {
        attempted: false,
        answer: None,
        step_index: 0,
        steps_run: pieces.len() as u32,
        failed_steps,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{ConstantQa, FreshQa, ScriptedQa};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn pieces(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("i am clue {i}")).collect()
    }

    /// Recounts every prefix of the script from scratch; independent of VoteState.
    fn brute_force(script: &[Vec<String>], threshold: u32) -> Option<(usize, String)> {
        let samples: Vec<(usize, &String)> =
            script.iter().enumerate().flat_map(|(s, c)| c.iter().map(move |x| (s, x))).collect();
        for step in 0..script.len() {
            let upto: Vec<&(usize, &String)> = samples.iter().filter(|(s, _)| *s <= step).collect();
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            let mut first: Vec<String> = Vec::new();
            for (_, raw) in &upto {
                let k = crate::dataset::normalize_answer(raw);
                if k.is_empty() {
                    continue;
                }
                if !first.contains(&k) {
                    first.push(k.clone());
                }
                *counts.entry(k).or_default() += 1;
            }
            if let Some(win) = first.iter().find(|k| counts[*k] >= threshold) {
                let mut c = 0;
                for (_, raw) in &upto {
                    if &crate::dataset::normalize_answer(raw) == win {
                        c += 1;
                        if c == threshold {
                            return Some((step + 1, (*raw).clone()));
                        }
                    }
                }
            }
        }
        None
    }

    #[test]
    fn oracle_from_step_two() {
        let qa = ScriptedQa::new(vec![
            Ok(vec!["a".into(), "b".into(), "c".into()]),
            Ok(vec!["wave".into(); 3]),
            Ok(vec!["wave".into(); 3]),
        ]);
        let out = run_policy(&pieces(3), &qa, VoteSettings::new(3, 3), &PromptTemplate::default()).unwrap();
        assert!(out.attempted);
        assert_eq!(out.step_index, 2);
        assert_eq!(out.answer.as_deref(), Some("wave"));
    }

    #[test]
    fn fresh_answers_never_attempt() {
        for threshold in 2..6 {
            let out = run_policy(&pieces(9), &FreshQa::default(), VoteSettings::new(threshold, 3), &PromptTemplate::default())
                .unwrap();
            assert!(!out.attempted);
            assert_eq!(out.step_index, 0);
            assert_eq!(out.final_state.steps_taken(), 9);
        }
    }

    #[test]
    fn empty_input_rejected() {
        let r = run_policy::<String>(&[], &ConstantQa::new("x"), VoteSettings::default(), &PromptTemplate::default());
        assert_eq!(r.unwrap_err(), PolicyError::NoInput);
    }

    #[test]
    fn qa_failure_costs_only_that_step() {
        let qa = ScriptedQa::new(vec![
            Err("timeout".into()),
            Ok(vec!["x".into(), "x".into(), "y".into()]),
            Ok(vec!["x".into(), "z".into(), "z".into()]),
        ]);
        let out = run_policy(&pieces(3), &qa, VoteSettings::new(3, 3), &PromptTemplate::default()).unwrap();
        assert_eq!(out.failed_steps.len(), 1);
        assert_eq!(out.failed_steps[0].0, 1);
        assert_eq!(out.step_index, 3);
        assert_eq!(out.final_state.steps_taken(), 3);
    }

    #[test]
    fn wrong_sample_count_is_a_failed_step() {
        let qa = ScriptedQa::new(vec![Ok(vec!["x".into()]), Ok(vec!["x".into(); 3])]);
        let out = run_policy(&pieces(2), &qa, VoteSettings::new(3, 3), &PromptTemplate::default()).unwrap();
        assert_eq!(out.failed_steps.len(), 1);
        assert_eq!(out.step_index, 2);
    }

    #[test]
    fn qa_sees_accumulated_input() {
        let qa = ScriptedQa::new(vec![Ok(vec!["a".into()]), Ok(vec!["b".into()])]);
        run_policy(&["one two", "three"], &qa, VoteSettings::new(5, 1), &PromptTemplate::default()).unwrap();
        assert_eq!(qa.seen_inputs(), vec!["one two".to_string(), "one two three".to_string()]);
    }

    fn script_strategy() -> impl Strategy<Value = (Vec<Vec<String>>, u32, usize)> {
        (1usize..=4, 1u32..=6).prop_flat_map(|(k, t)| {
            let answer = prop_oneof![Just("a"), Just("B"), Just("c."), Just("The d"), Just("e")].prop_map(String::from);
            (proptest::collection::vec(proptest::collection::vec(answer, k), 1..=9), Just(t), Just(k))
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((script, threshold, k) in script_strategy()) {
            let qa = ScriptedQa::new(script.iter().cloned().map(Ok).collect());
            let out = run_policy(&pieces(script.len()), &qa, VoteSettings::new(threshold, k), &PromptTemplate::default()).unwrap();
            let expected = brute_force(&script, threshold);
            prop_assert_eq!(out.answer.clone().map(|a| (out.step_index as usize, a)), expected);
        }

        #[test]
        fn higher_threshold_never_earlier((script, threshold, k) in script_strategy()) {
            let run = |t| {
                let qa = ScriptedQa::new(script.iter().cloned().map(Ok).collect());
                let out = run_policy(&pieces(script.len()), &qa, VoteSettings::new(t, k), &PromptTemplate::default()).unwrap();
                if out.attempted { out.step_index } else { u32::MAX }
            };
            prop_assert!(run(threshold + 1) >= run(threshold));
        }

        #[test]
        fn fixed_answer_attempts_at_step_one(k in 1usize..6, t in 1u32..6, n in 1usize..9) {
            prop_assume!(t as usize <= k);
            let out = run_policy(&pieces(n), &ConstantQa::new("Cell"), VoteSettings::new(t, k), &PromptTemplate::default()).unwrap();
            prop_assert_eq!(out.step_index, 1);
        }

        #[test]
        fn tallies_sum_to_samples((script, _t, k) in script_strategy()) {
            let qa = ScriptedQa::new(script.iter().cloned().map(Ok).collect());
            let out = run_policy(&pieces(script.len()), &qa, VoteSettings::new(1000, k), &PromptTemplate::default()).unwrap();
            let counted: u32 = out.final_state.tallies().values().sum();
            let answered = script.iter().flatten().filter(|a| !crate::dataset::normalize_answer(a).is_empty()).count();
            prop_assert_eq!(counted as usize, answered);
            if answered == script.len() * k {
                prop_assert_eq!(counted as usize, out.final_state.steps_taken() as usize * k);
            }
        }
    }
}
