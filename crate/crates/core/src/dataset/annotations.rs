use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Which clue (if any) the best human team answered a riddle on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanAnnotation {
    pub riddle_id: String,
    pub answered: bool,
    pub clue_number: Option<u32>,
    pub correct: bool,
}

impl HumanAnnotation {
    pub fn validate(&self, row: usize) -> Result<(), DatasetError> {
        let fail = |m: &str| Err(DatasetError::row(row, m));
        if !self.answered && self.clue_number.is_some() {
            return fail("clue_number present on an unanswered riddle");
        }
        if !self.answered && self.correct {
            return fail("unanswered riddle marked correct");
        }
        if self.answered && self.clue_number.is_none() {
            return fail("answered riddle has no clue_number");
        }
        if self.clue_number == Some(0) {
            return fail("clue_number must be >= 1");
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawAnnotation {
    riddle_id: String,
    answered: String,
    clue_number: String,
    correct: String,
}

fn parse_bool(row: usize, field: &str, value: &str) -> Result<bool, DatasetError> {
    match value.trim().to_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(DatasetError::row(row, format!("{field}: expected true/false, got {other:?}"))),
    }
}

/// Loads the annotation CSV (`riddle_id,answered,clue_number,correct`).
///
/// Riddle ids are not cross-checked against any dataset here.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<HumanAnnotation>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotations(file)
}

pub fn parse_annotations<R: Read>(reader: R) -> Result<Vec<HumanAnnotation>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["riddle_id", "answered", "clue_number", "correct"] {
        if !headers.iter().any(|h| h == col) {
            return Err(DatasetError::MissingColumn(col.to_owned()));
        }
    }
    let mut out = Vec::new();
    for (idx, raw) in rdr.deserialize::<RawAnnotation>().enumerate() {
        let row = idx + 1;
        let raw = raw?;
        let clue = raw.clue_number.trim();
        let clue_number = if clue.is_empty() || clue == "-" {
            None
        } else {
            Some(
                clue.parse::<u32>()
                    .map_err(|_| DatasetError::row(row, format!("invalid clue_number {clue:?}")))?,
            )
        };
        let ann = HumanAnnotation {
            riddle_id: raw.riddle_id,
            answered: parse_bool(row, "answered", &raw.answered)?,
            clue_number,
            correct: parse_bool(row, "correct", &raw.correct)?,
        };
        ann.validate(row)?;
        out.push(ann);
    }
    Ok(out)
}

pub fn write_annotations<W: Write>(writer: W, annotations: &[HumanAnnotation]) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["riddle_id", "answered", "clue_number", "correct"])?;
    for a in annotations {
        wtr.write_record([
            a.riddle_id.clone(),
            a.answered.to_string(),
            a.clue_number.map(|c| c.to_string()).unwrap_or_default(),
            a.correct.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| DatasetError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "riddle_id,answered,clue_number,correct\n";

    #[test]
    fn direct_mapping() {
        let anns = parse_annotations(format!("{HEADER}r1,true,3,true\nr2,false,-,false\n").as_bytes()).unwrap();
        assert_eq!(
            anns[0],
            HumanAnnotation { riddle_id: "r1".into(), answered: true, clue_number: Some(3), correct: true }
        );
        assert_eq!(
            anns[1],
            HumanAnnotation { riddle_id: "r2".into(), answered: false, clue_number: None, correct: false }
        );
    }

    #[test]
    fn clue_number_on_unanswered_rejected() {
        let err = parse_annotations(format!("{HEADER}r3,false,2,false\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Row { row: 1, .. }));
    }

    #[test]
    fn zero_clue_rejected() {
        assert!(parse_annotations(format!("{HEADER}r3,true,0,false\n").as_bytes()).is_err());
    }

    #[test]
    fn missing_column() {
        let err = parse_annotations("riddle_id,answered\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::MissingColumn(c) if c == "clue_number"));
    }

    #[test]
    fn write_then_parse() {
        let anns = vec![
            HumanAnnotation { riddle_id: "a".into(), answered: true, clue_number: Some(1), correct: true },
            HumanAnnotation { riddle_id: "b".into(), answered: false, clue_number: None, correct: false },
        ];
        let mut buf = Vec::new();
        write_annotations(&mut buf, &anns).unwrap();
        assert_eq!(parse_annotations(buf.as_slice()).unwrap(), anns);
    }
}
