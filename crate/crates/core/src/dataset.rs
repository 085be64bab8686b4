//! Question/program/answer datasets.
//!
//! Two layouts are read: a JSON array of objects (the KQA Pro train/val
//! files, programs as step lists with `function`/`inputs`/`dependencies`),
//! and JSON lines. In either, `program` may be a list of steps or the
//! linearized `<func>`/`<arg>` text. A program that fails to parse does not
//! fail the load; it is kept as an error on its record.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::program::{parse_program, Program, ProgramError, StructuredStep};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("malformed dataset: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ProgramField {
    Text(String),
    Steps(Vec<StructuredStep>),
}

#[derive(Debug, Clone, Deserialize)]
struct RawRecord {
    question: String,
    program: ProgramField,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub question: String,
    pub program: Result<Program, ProgramError>,
    pub answer: Option<String>,
    /// Kept for completeness; nothing reads them.
    pub choices: Vec<String>,
}

impl From<RawRecord> for DatasetRecord {
    fn from(raw: RawRecord) -> Self {
        let program = match raw.program {
            ProgramField::Text(t) => parse_program(&t),
            ProgramField::Steps(s) => Program::from_structured(s),
        };
        DatasetRecord {
            question: raw.question,
            program,
            answer: raw.answer,
            choices: raw.choices,
        }
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    if text.trim_start().starts_with('[') {
        let raw: Vec<RawRecord> =
            serde_json::from_str(text).map_err(|e| DatasetError::Json(e.to_string()))?;
        return Ok(raw.into_iter().map(DatasetRecord::from).collect());
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<RawRecord>(l)
                .map(DatasetRecord::from)
                .map_err(|e| DatasetError::Line {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Function;

    #[test]
    fn kqa_layout() {
        let text = r#"[
          {"question": "Who was born in Quincy?",
           "choices": ["a", "b"],
           "program": [
             {"function": "Find", "dependencies": [], "inputs": ["Quincy"]},
             {"function": "Relate", "dependencies": [0], "inputs": ["place of birth", "backward"]},
             {"function": "QueryName", "dependencies": [1], "inputs": []}
           ],
           "sparql": "ignored",
           "answer": "John Quincy Adams"}
        ]"#;
        let recs = parse_dataset(text).unwrap();
        assert_eq!(recs.len(), 1);
        let p = recs[0].program.as_ref().unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.steps()[1].function(), Function::Relate);
        assert_eq!(recs[0].answer.as_deref(), Some("John Quincy Adams"));
        assert_eq!(recs[0].choices, ["a", "b"]);
    }

    #[test]
    fn json_lines_layout() {
        let text = "{\"question\": \"q1\", \"program\": \"FindAll <func> Count\", \"answer\": \"3\"}\n\n\
                    {\"question\": \"q2\", \"program\": [{\"function\": \"FindAll\"}, {\"function\": \"Count\"}]}\n";
        let recs = parse_dataset(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].program, recs[1].program);
        assert_eq!(recs[1].answer, None);
    }

    #[test]
    fn bad_programs_stay_on_their_record() {
        let text = "{\"question\": \"q\", \"program\": \"Count\"}\n\
                    {\"question\": \"q\", \"program\": \"Launch <arg> x\"}";
        let recs = parse_dataset(text).unwrap();
        assert!(recs.iter().all(|r| r.program.is_err()));
    }

    #[test]
    fn wrong_dependencies_are_rejected() {
        let text = r#"[{"question": "q", "program": [
            {"function": "FindAll", "dependencies": []},
            {"function": "FindAll", "dependencies": []},
            {"function": "And", "dependencies": [0, 0]},
            {"function": "Count", "dependencies": [2]}]}]"#;
        let recs = parse_dataset(text).unwrap();
        assert!(matches!(
            recs[0].program,
            Err(ProgramError::Dependencies { step: 2, .. })
        ));
    }

    #[test]
    fn malformed_lines_fail_the_load() {
        let err =
            parse_dataset("{\"question\": \"q\", \"program\": \"FindAll\"}\n{oops").unwrap_err();
        assert!(matches!(err, DatasetError::Line { line: 2, .. }));
        assert!(matches!(parse_dataset("[1, 2"), Err(DatasetError::Json(_))));
        assert!(parse_dataset("").unwrap().is_empty());
    }
}
