//! Riddle dataset loading, validation and normalization.
//!
//! Riddle files use the round's CSV layout: `Clue 1`..`Clue 9`, `Answer`,
//! `Answer 1`..`Answer 4`, and optional `Subject`, `Contest` and `Year`
//! columns. Clue lists stop at the first empty clue cell.

mod annotations;
mod normalize;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use annotations::{load_annotations, parse_annotations, write_annotations, HumanAnnotation};
pub use normalize::normalize_answer;

pub const MAX_CLUES: usize = 9;
pub const MAX_ALT_ANSWERS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("duplicate riddle id {0:?}")]
    DuplicateId(String),
}

impl DatasetError {
    fn row(row: usize, message: impl Into<String>) -> Self {
        DatasetError::Row {
            row,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Biology,
    Chemistry,
    Physics,
    Math,
}

impl Subject {
    pub const ALL: [Subject; 4] = [
        Subject::Biology,
        Subject::Chemistry,
        Subject::Physics,
        Subject::Math,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subject::Biology => "biology",
            Subject::Chemistry => "chemistry",
            Subject::Physics => "physics",
            Subject::Math => "math",
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "biology" | "bio" => Ok(Subject::Biology),
            "chemistry" | "chem" => Ok(Subject::Chemistry),
            "physics" => Ok(Subject::Physics),
            "math" | "maths" | "mathematics" => Ok(Subject::Math),
            other => Err(format!("unknown subject {other:?}")),
        }
    }
}

/// One riddle: clues read in order, the ground truth and its alternates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Riddle {
    pub id: String,
    pub year: i32,
    pub contest: String,
    /// `None` when the source file carries no subject column.
    pub subject: Option<Subject>,
    pub clues: Vec<String>,
    pub answer: String,
    pub alt_answers: Vec<String>,
}

impl Riddle {
    /// Checks the type invariants; `row` is only used for error reporting.
    pub fn validate(&self, row: usize) -> Result<(), DatasetError> {
        if self.clues.is_empty() || self.clues.len() > MAX_CLUES {
            return Err(DatasetError::row(
                row,
                format!("riddle must have 1..={MAX_CLUES} clues, found {}", self.clues.len()),
            ));
        }
        if let Some(i) = self.clues.iter().position(|c| c.trim().is_empty()) {
            return Err(DatasetError::row(row, format!("clue {} is empty", i + 1)));
        }
        if self.answer.trim().is_empty() {
            return Err(DatasetError::row(row, "empty \"Answer\""));
        }
        if self.alt_answers.len() > MAX_ALT_ANSWERS {
            return Err(DatasetError::row(row, "more than 4 alternate answers"));
        }
        let mut seen = BTreeSet::new();
        for alt in &self.alt_answers {
            if alt.trim().is_empty() {
                return Err(DatasetError::row(row, "empty alternate answer"));
            }
            if !seen.insert(normalize_answer(alt)) {
                return Err(DatasetError::row(row, format!("duplicate alternate answer {alt:?}")));
            }
        }
        Ok(())
    }

    /// The ground truth followed by the alternates.
    pub fn truths(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.answer.as_str()).chain(self.alt_answers.iter().map(String::as_str))
    }

    /// All clues joined with single spaces.
    pub fn all_clues_text(&self) -> String {
        self.clues.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiddleDataset {
    pub riddles: Vec<Riddle>,
    pub source_path: String,
}

impl RiddleDataset {
    pub fn new(riddles: Vec<Riddle>, source_path: impl Into<String>) -> Result<Self, DatasetError> {
        let mut ids = BTreeSet::new();
        for r in &riddles {
            if !ids.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
        }
        Ok(RiddleDataset {
            riddles,
            source_path: source_path.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.riddles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.riddles.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Riddle> {
        self.riddles.iter().find(|r| r.id == id)
    }

    pub fn index_by_id(&self) -> HashMap<&str, &Riddle> {
        self.riddles.iter().map(|r| (r.id.as_str(), r)).collect()
    }
}

fn clue_column(i: usize) -> String {
    format!("Clue {i}")
}

fn alt_column(i: usize) -> String {
    format!("Answer {i}")
}

/// Identifier assigned to the riddle on 1-based data row `row`.
pub fn riddle_id(year: i32, row: usize) -> String {
    format!("{year}-{row:03}")
}

/// Loads a riddle CSV; `year` applies to rows without a `Year` cell.
pub fn load_riddle_dataset(path: impl AsRef<Path>, year: i32) -> Result<RiddleDataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let riddles = parse_riddles(file, year)?;
    RiddleDataset::new(riddles, path.display().to_string())
}

/// Parses riddle rows from any reader. See [`load_riddle_dataset`].
pub fn parse_riddles<R: Read>(reader: R, year: i32) -> Result<Vec<Riddle>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let require = |name: String| find(&name).ok_or(DatasetError::MissingColumn(name));

    let clue_cols = (1..=MAX_CLUES)
        .map(|i| require(clue_column(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let answer_col = require("Answer".to_owned())?;
    let alt_cols = (1..=MAX_ALT_ANSWERS)
        .map(|i| require(alt_column(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let subject_col = find("Subject");
    let contest_col = find("Contest");
    let year_col = find("Year");

    let mut riddles = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let cell = |col: usize| record.get(col).unwrap_or("").trim();

        let clues: Vec<String> = clue_cols
            .iter()
            .map(|&c| cell(c))
            .take_while(|c| !c.is_empty())
            .map(str::to_owned)
            .collect();
        if clues.is_empty() {
            return Err(DatasetError::row(row, "empty \"Clue 1\""));
        }
        let answer = cell(answer_col);
        if answer.is_empty() {
            return Err(DatasetError::row(row, "empty \"Answer\""));
        }
        let alt_answers = alt_cols
            .iter()
            .map(|&c| cell(c))
            .filter(|c| !c.is_empty())
            .map(str::to_owned)
            .collect();
        let subject = match subject_col.map(cell).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse().map_err(|e: String| DatasetError::row(row, e))?),
            None => None,
        };
        let row_year = match year_col.map(cell).filter(|s| !s.is_empty()) {
            Some(y) => y
                .parse()
                .map_err(|_| DatasetError::row(row, format!("invalid year {y:?}")))?,
            None => year,
        };
        let riddle = Riddle {
            id: riddle_id(row_year, row),
            year: row_year,
            contest: contest_col.map(cell).unwrap_or("").to_owned(),
            subject,
            clues,
            answer: answer.to_owned(),
            alt_answers,
        };
        riddle.validate(row)?;
        riddles.push(riddle);
    }
    Ok(riddles)
}

/// Writes the canonical CSV layout; loading the output reproduces the dataset
/// as long as ids follow [`riddle_id`].
pub fn write_riddle_csv<W: Write>(writer: W, riddles: &[Riddle]) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=MAX_CLUES).map(clue_column).collect();
    header.push("Answer".into());
    header.extend((1..=MAX_ALT_ANSWERS).map(alt_column));
    header.extend(["Subject", "Contest", "Year"].map(String::from));
    wtr.write_record(&header)?;
    for r in riddles {
        let mut row: Vec<String> = (0..MAX_CLUES)
            .map(|i| r.clues.get(i).cloned().unwrap_or_default())
            .collect();
        row.push(r.answer.clone());
        row.extend((0..MAX_ALT_ANSWERS).map(|i| r.alt_answers.get(i).cloned().unwrap_or_default()));
        row.push(r.subject.map(|s| s.to_string()).unwrap_or_default());
        row.push(r.contest.clone());
        row.push(r.year.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| DatasetError::Csv(e.into()))?;
    Ok(())
}
