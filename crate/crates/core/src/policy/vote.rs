use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::dataset::normalize_answer;

/// The answers drawn for one input step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSampleSet {
    pub input_text: String,
    pub candidates: Vec<String>,
}

/// Running answer tallies for one riddle.
///
/// Tallies are keyed by normalized answer so surface variants share a
/// count. Candidates that normalize to nothing are not counted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteState {
    tallies: BTreeMap<String, u32>,
    /// Order of first appearance, for tie-breaking.
    first_seen: BTreeMap<String, u64>,
    next_order: u64,
    threshold: u32,
    samples_per_step: usize,
    attempted: bool,
    steps_taken: u32,
}

impl VoteState {
    pub fn new(threshold: u32, samples_per_step: usize) -> Result<Self, PolicyError> {
        if threshold < 1 {
            return Err(PolicyError::Config("threshold must be >= 1".into()));
        }
        if samples_per_step < 1 {
            return Err(PolicyError::Config("samples_per_step must be >= 1".into()));
        }
        Ok(VoteState {
            tallies: BTreeMap::new(),
            first_seen: BTreeMap::new(),
            next_order: 0,
            threshold,
            samples_per_step,
            attempted: false,
            steps_taken: 0,
        })
    }

    pub fn tallies(&self) -> &BTreeMap<String, u32> {
        &self.tallies
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn samples_per_step(&self) -> usize {
        self.samples_per_step
    }

    pub fn attempted(&self) -> bool {
        self.attempted
    }

    pub fn steps_taken(&self) -> u32 {
        self.steps_taken
    }

    /// Tallies one step of samples and returns the attempt answer, if any.
    ///
    /// When several answers reach the threshold in the same step, the one
    /// seen earliest wins. The returned text is the raw candidate whose vote
    /// brought that answer to the threshold.
    pub fn step(&mut self, samples: &QaSampleSet) -> Result<Option<String>, PolicyError> {
        if self.attempted {
            return Err(PolicyError::AlreadyAttempted);
        }
        if samples.candidates.len() != self.samples_per_step {
            return Err(PolicyError::SampleCount {
                expected: self.samples_per_step,
                got: samples.candidates.len(),
            });
        }
        self.steps_taken += 1;
        let mut crossing: BTreeMap<String, &str> = BTreeMap::new();
        for raw in &samples.candidates {
            let key = normalize_answer(raw);
            if key.is_empty() {
                continue;
            }
            if !self.first_seen.contains_key(&key) {
                self.first_seen.insert(key.clone(), self.next_order);
                self.next_order += 1;
            }
            let count = self.tallies.entry(key.clone()).or_insert(0);
            *count += 1;
            if *count == self.threshold {
                crossing.insert(key, raw);
            }
        }
        let winner = crossing
            .iter()
            .min_by_key(|(key, _)| self.first_seen[*key])
            .map(|(_, raw)| (*raw).to_owned());
        if winner.is_some() {
            self.attempted = true;
        }
        Ok(winner)
    }

    /// Records a step that produced no usable samples.
    pub fn skip_step(&mut self) -> Result<(), PolicyError> {
        if self.attempted {
            return Err(PolicyError::AlreadyAttempted);
        }
        self.steps_taken += 1;
        Ok(())
    }
}

/// Functional form of [`VoteState::step`].
pub fn vote_step(state: &VoteState, samples: &QaSampleSet) -> Result<(VoteState, Option<String>), PolicyError> {
    let mut next = state.clone();
    let answer = next.step(samples)?;
    Ok((next, answer))
}
