//! Line-delimited JSON record files: documents and evaluation queries.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::temporal::TimePoint;

/// One retrieved document. Sentence segmentation happens upstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub docid: String,
    #[serde(default)]
    pub title: String,
    pub sentences: Vec<String>,
    pub pub_time: TimePoint,
    pub authority: f64,
    #[serde(default)]
    pub source: String,
}

impl Document {
    pub fn validate(&self) -> Result<(), String> {
        if self.docid.trim().is_empty() {
            return Err("docid is empty".into());
        }
        if self.pub_time.depth() != 3 {
            return Err(format!("pub_time {} is not a full date", self.pub_time));
        }
        if !(0.0..=1.0).contains(&self.authority) {
            return Err(format!("authority {} outside [0, 1]", self.authority));
        }
        Ok(())
    }
}

/// A record-level problem found while loading a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LoadIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{} invalid record(s) in {path}: {}", issues.len(), issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { path: String, issues: Vec<LoadIssue> },
}

/// Parses JSON lines, skipping blank lines, and checks each record with
/// `validate`. Any issue aborts the load with the full itemized list.
pub fn parse_records<T, F>(text: &str, origin: &str, validate: F) -> Result<Vec<T>, CorpusError>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Result<(), String>,
{
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(line) {
            Ok(record) => match validate(&record) {
                Ok(()) => records.push(record),
                Err(message) => issues.push(LoadIssue { line: i + 1, message }),
            },
            Err(err) => issues.push(LoadIssue {
                line: i + 1,
                message: err.to_string(),
            }),
        }
    }
    if issues.is_empty() {
        Ok(records)
    } else {
        Err(CorpusError::Invalid {
            path: origin.to_string(),
            issues,
        })
    }
}

pub fn load_records<T, F>(path: &Path, validate: F) -> Result<Vec<T>, CorpusError>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Result<(), String>,
{
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: origin.clone(),
        source,
    })?;
    parse_records(&text, &origin, validate)
}

pub fn load_documents(path: &Path) -> Result<Vec<Document>, CorpusError> {
    load_records(path, Document::validate)
}

pub fn write_records<T: Serialize, W: Write>(mut out: W, records: &[T]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads every non-blank line of a small text file, e.g. a stopword list.
pub fn read_word_list(path: &Path) -> std::io::Result<Vec<String>> {
    let file = std::fs::File::open(path)?;
    let mut words = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        let word = line.trim();
        if !word.is_empty() && !word.starts_with('#') {
            words.push(word.to_string());
        }
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn itemizes_every_bad_line() {
        let text = concat!(
            r#"{"docid":"a","title":"t","sentences":["x"],"pub_time":"2025-01-01","authority":0.5,"source":"s"}"#,
            "\n",
            r#"{"docid":"b","sentences":[],"pub_time":"2025-01","authority":0.5}"#,
            "\n\n",
            r#"{"docid":"c","sentences":[],"pub_time":"2025-01-01","authority":1.5}"#,
            "\n",
            "not json\n"
        );
        let err = parse_records(text, "mem", Document::validate).unwrap_err();
        match err {
            CorpusError::Invalid { issues, .. } => {
                let lines: Vec<usize> = issues.iter().map(|i| i.line).collect();
                assert_eq!(lines, vec![2, 4, 5]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"docid":"a","sentences":[],"pub_time":"2025-01-01","authority":0.5,"extra":1}"#;
        assert!(parse_records(text, "mem", Document::validate).is_err());
    }
}
