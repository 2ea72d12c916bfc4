use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_answer, RiddleDataset};
use crate::ports::{PortError, PortKind, QaPort, QaQuery};

/// Always returns the same answer.
#[derive(Debug, Clone)]
pub struct ConstantQa(pub String);

impl ConstantQa {
    pub fn new(answer: impl Into<String>) -> Self {
        ConstantQa(answer.into())
    }
}

impl QaPort for ConstantQa {
    fn answer(&self, q: &QaQuery<'_>) -> Result<Vec<String>, PortError> {
        Ok(vec![self.0.clone(); q.n_samples])
    }
}

/// Returns a never-repeating answer for every sample.
#[derive(Debug, Default)]
pub struct FreshQa {
    counter: AtomicU64,
}

impl QaPort for FreshQa {
    fn answer(&self, q: &QaQuery<'_>) -> Result<Vec<String>, PortError> {
        Ok((0..q.n_samples)
            .map(|_| format!("fresh guess {}", self.counter.fetch_add(1, Ordering::Relaxed)))
            .collect())
    }
}

/// Replays a fixed sequence of responses, one per call.
///
/// `Err` entries become port failures; calls past the end fail too.
#[derive(Debug, Default)]
pub struct ScriptedQa {
    responses: Mutex<VecDeque<Result<Vec<String>, String>>>,
    seen: Mutex<Vec<String>>,
}

impl ScriptedQa {
    pub fn new(responses: Vec<Result<Vec<String>, String>>) -> Self {
        ScriptedQa { responses: Mutex::new(responses.into()), seen: Mutex::default() }
    }

    /// Input texts received so far, in call order.
    pub fn seen_inputs(&self) -> Vec<String> {
        self.seen.lock().unwrap().clone()
    }
}

impl QaPort for ScriptedQa {
    fn answer(&self, q: &QaQuery<'_>) -> Result<Vec<String>, PortError> {
        self.seen.lock().unwrap().push(q.input_text.to_owned());
        match self.responses.lock().unwrap().pop_front() {
            Some(Ok(answers)) => Ok(answers),
            Some(Err(msg)) => Err(PortError::new(PortKind::Qa, msg)),
            None => Err(PortError::new(PortKind::Qa, "script exhausted")),
        }
    }
}

/// What the oracle says before it is allowed to reveal the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrongAnswers {
    /// Different guesses on every sample, so no wrong tally ever grows.
    #[default]
    Distinct,
    /// The same wrong answer every time, which tempts the vote into an early attempt.
    Consistent,
}

#[derive(Debug, Clone, Copy)]
struct OracleRule {
    reveal_after_clue: u32,
    wrong: WrongAnswers,
}

struct IndexedRiddle {
    id: String,
    answer: String,
    tokens: Vec<String>,
    clue_of_token: Vec<u32>,
}

/// Knows every riddle and answers correctly once enough clues have been heard.
///
/// The riddle and the current clue are recovered from the longest token
/// prefix the input shares with a riddle's concatenated clues. Before
/// `reveal_after_clue` the oracle gives wrong answers. Stateless between calls.
pub struct OracleQa {
    riddles: Vec<IndexedRiddle>,
    default_rule: OracleRule,
    overrides: HashMap<String, OracleRule>,
}

impl OracleQa {
    pub fn new(dataset: &RiddleDataset, reveal_after_clue: u32, wrong: WrongAnswers) -> Self {
        let riddles = dataset
            .riddles
            .iter()
            .map(|r| {
                let mut tokens = Vec::new();
                let mut clue_of_token = Vec::new();
                for (i, clue) in r.clues.iter().enumerate() {
                    for tok in normalize_answer(clue).split_whitespace() {
                        tokens.push(tok.to_owned());
                        clue_of_token.push(i as u32 + 1);
                    }
                }
                IndexedRiddle { id: r.id.clone(), answer: r.answer.clone(), tokens, clue_of_token }
            })
            .collect();
        OracleQa {
            riddles,
            default_rule: OracleRule { reveal_after_clue, wrong },
            overrides: HashMap::new(),
        }
    }

    /// Always correct.
    pub fn perfect(dataset: &RiddleDataset) -> Self {
        Self::new(dataset, 1, WrongAnswers::Distinct)
    }

    pub fn with_override(mut self, riddle_id: &str, reveal_after_clue: u32, wrong: WrongAnswers) -> Self {
        self.overrides.insert(riddle_id.to_owned(), OracleRule { reveal_after_clue, wrong });
        self
    }

    /// The riddle the input belongs to and the clue its last matched token is in.
    pub fn locate(&self, input: &str) -> Option<(&str, u32)> {
        let input = normalize_answer(input);
        let toks: Vec<&str> = input.split_whitespace().collect();
        let mut best: Option<(usize, &IndexedRiddle)> = None;
        for r in &self.riddles {
            let lcp = r.tokens.iter().zip(&toks).take_while(|(a, b)| a == *b).count();
            if lcp > 0 && best.is_none_or(|(b, _)| lcp > b) {
                best = Some((lcp, r));
            }
        }
        best.map(|(lcp, r)| (r.id.as_str(), r.clue_of_token[lcp - 1]))
    }
}

impl QaPort for OracleQa {
    fn answer(&self, q: &QaQuery<'_>) -> Result<Vec<String>, PortError> {
        let n_tokens = q.input_text.split_whitespace().count();
        let guesses = |progress: u32| {
            (0..q.n_samples).map(|i| format!("guess {progress} {n_tokens} {i}")).collect::<Vec<_>>()
        };
        let Some((id, progress)) = self.locate(q.input_text) else {
            return Ok(guesses(0));
        };
        let rule = self.overrides.get(id).copied().unwrap_or(self.default_rule);
        if progress >= rule.reveal_after_clue {
            let answer = &self.riddles.iter().find(|r| r.id == id).expect("located riddle").answer;
            return Ok(vec![answer.clone(); q.n_samples]);
        }
        Ok(match rule.wrong {
            WrongAnswers::Distinct => guesses(progress),
            WrongAnswers::Consistent => vec![format!("decoy {id}"); q.n_samples],
        })
    }
}
