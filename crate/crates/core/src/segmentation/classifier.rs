use serde::{Deserialize, Serialize};

use crate::ports::{ClueClassifier, PortError, SegmentKind};
use crate::text::{contains_phrase, tokens};

const RIDDLE_MARKERS: [&str; 5] = ["i am", "i was", "i describe", "my", "who am i"];
const ADMIN_MARKERS: [&str; 5] = ["points", "school", "bell", "we begin", "correct answer"];

/// Keyword stand-in for a learned clue classifier.
///
/// A segment is a clue when it contains a first-person riddle marker and no
/// quiz-administration marker. Segments with both are non-clues.
#[derive(Debug, Clone)]
pub struct RuleBaselineClassifier {
    riddle_markers: Vec<Vec<String>>,
    admin_markers: Vec<Vec<String>>,
}

impl Default for RuleBaselineClassifier {
    fn default() -> Self {
        RuleBaselineClassifier {
            riddle_markers: RIDDLE_MARKERS.iter().map(|m| tokens(m)).collect(),
            admin_markers: ADMIN_MARKERS.iter().map(|m| tokens(m)).collect(),
        }
    }
}

impl RuleBaselineClassifier {
    pub fn classify_text(&self, text: &str) -> SegmentKind {
        let toks = tokens(text);
        let any = |markers: &[Vec<String>]| markers.iter().any(|m| contains_phrase(&toks, m));
        if any(&self.riddle_markers) && !any(&self.admin_markers) {
            SegmentKind::Clue
        } else {
            SegmentKind::NonClue
        }
    }
}

impl ClueClassifier for RuleBaselineClassifier {
    fn classify(&self, text: &str) -> Result<SegmentKind, PortError> {
        Ok(self.classify_text(text))
    }
}

/// Marks every segment inside an active riddle as a clue.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllClueClassifier;

impl ClueClassifier for AllClueClassifier {
    fn classify(&self, _text: &str) -> Result<SegmentKind, PortError> {
        Ok(SegmentKind::Clue)
    }
}

/// Classifier choice in detector configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierSelector {
    #[default]
    RuleBaseline,
    AllClue,
}

impl ClassifierSelector {
    pub fn build(self) -> Box<dyn ClueClassifier> {
        match self {
            ClassifierSelector::RuleBaseline => Box::new(RuleBaselineClassifier::default()),
            ClassifierSelector::AllClue => Box::new(AllClueClassifier),
        }
    }
}
