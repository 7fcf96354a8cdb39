//! JSONL dataset loading.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::HarnessError;
use crate::types::{Question, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub gold: Option<String>,
    #[serde(default)]
    pub choices: Option<Vec<String>>,
    #[serde(default)]
    pub task_kind: TaskKind,
}

impl DatasetRecord {
    fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.question.trim().is_empty() {
            return Err("empty question".into());
        }
        if self.task_kind == TaskKind::MultipleChoice
            && self.choices.as_ref().is_none_or(|c| c.is_empty())
        {
            return Err("multiple_choice record needs choices".into());
        }
        if self.choices.as_ref().is_some_and(|c| c.len() > 26) {
            return Err("at most 26 choices are supported".into());
        }
        Ok(())
    }

    /// Question text with choices appended as `A. ...` lines.
    pub fn prompt_text(&self) -> String {
        match &self.choices {
            Some(choices) if !choices.is_empty() => {
                let mut text = self.question.trim_end().to_owned();
                for (i, c) in choices.iter().enumerate() {
                    text.push('\n');
                    text.push((b'A' + i as u8) as char);
                    text.push_str(". ");
                    text.push_str(c);
                }
                text
            }
            _ => self.question.clone(),
        }
    }

    pub fn to_question(&self) -> Question {
        Question {
            id: self.id.clone(),
            text: self.prompt_text(),
            gold: self.gold.clone(),
            task_kind: self.task_kind,
        }
    }
}

/// A problem found on one input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// File stem; names the transcript directory.
    pub name: String,
    pub records: Vec<DatasetRecord>,
    /// Lines skipped in lenient mode.
    pub issues: Vec<LineIssue>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, records: Vec<DatasetRecord>) -> Self {
        Self {
            name: name.into(),
            records,
            issues: Vec::new(),
        }
    }
}

/// Parse JSONL text. Blank lines are ignored. In strict mode the first bad
/// line is an error; otherwise bad lines (including repeated ids) are
/// skipped and listed in [`Dataset::issues`].
pub fn parse_dataset(name: &str, text: &str, strict: bool, origin: &Path) -> Result<Dataset, HarnessError> {
    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<DatasetRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.check().map(|_| r))
            .and_then(|r| {
                if seen.insert(r.id.clone()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate id {:?}", r.id))
                }
            });
        match parsed {
            Ok(r) => records.push(r),
            Err(message) if strict => {
                return Err(HarnessError::Dataset {
                    path: origin.to_path_buf(),
                    line: line_no,
                    message,
                })
            }
            Err(message) => {
                warn!(line = line_no, %message, "skipping dataset line");
                issues.push(LineIssue { line: line_no, message });
            }
        }
    }
    Ok(Dataset {
        name: name.to_owned(),
        records,
        issues,
    })
}

pub fn load_dataset(path: &Path, strict: bool) -> Result<Dataset, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(PathBuf::from(path), e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());
    parse_dataset(&name, &text, strict, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, strict: bool) -> Result<Dataset, HarnessError> {
        parse_dataset("t", text, strict, Path::new("t.jsonl"))
    }

    #[test]
    fn valid_lines() {
        let text: String = (0..100)
            .map(|i| format!("{{\"id\":\"q{i}\",\"question\":\"what is {i}?\",\"gold\":\"{i}\"}}\n"))
            .collect();
        let ds = parse(&text, true).unwrap();
        assert_eq!(ds.records.len(), 100);
        assert!(ds.issues.is_empty());
    }

    #[test]
    fn missing_question_is_skipped_when_lenient() {
        let text = "{\"id\":\"a\",\"question\":\"q\"}\n{\"id\":\"b\"}\n\n{\"id\":\"c\",\"question\":\"q\"}\n";
        let ds = parse(text, false).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.issues.len(), 1);
        assert_eq!(ds.issues[0].line, 2);
        assert!(matches!(parse(text, true), Err(HarnessError::Dataset { line: 2, .. })));
    }

    #[test]
    fn duplicate_ids() {
        let text = "{\"id\":\"a\",\"question\":\"q\"}\n{\"id\":\"a\",\"question\":\"r\"}\n";
        assert!(matches!(parse(text, true), Err(HarnessError::Dataset { line: 2, .. })));
        let ds = parse(text, false).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.records[0].question, "q");
    }

    #[test]
    fn multiple_choice_needs_choices() {
        let bad = "{\"id\":\"a\",\"question\":\"q\",\"task_kind\":\"multiple_choice\"}\n";
        assert!(parse(bad, true).is_err());
        let good = "{\"id\":\"a\",\"question\":\"Pick\",\"task_kind\":\"multiple_choice\",\"choices\":[\"x\",\"y\"],\"gold\":\"B\"}\n";
        let ds = parse(good, true).unwrap();
        assert_eq!(ds.records[0].prompt_text(), "Pick\nA. x\nB. y");
    }
}
