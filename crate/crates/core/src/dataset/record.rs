use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::molgraph::{canonical_smiles, parse_selfies, MolError, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskGroup {
    PropertyRegression,
    PropertyClassification,
    Reaction,
    Molgen,
    Captioning,
    NameConversion,
}

impl TaskGroup {
    pub const ALL: [TaskGroup; 6] = [
        TaskGroup::PropertyRegression,
        TaskGroup::PropertyClassification,
        TaskGroup::Reaction,
        TaskGroup::Molgen,
        TaskGroup::Captioning,
        TaskGroup::NameConversion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskGroup::PropertyRegression => "property_regression",
            TaskGroup::PropertyClassification => "property_classification",
            TaskGroup::Reaction => "reaction",
            TaskGroup::Molgen => "molgen",
            TaskGroup::Captioning => "captioning",
            TaskGroup::NameConversion => "name_conversion",
        }
    }
}

impl fmt::Display for TaskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskGroup::ALL.into_iter().find(|g| g.as_str() == s).ok_or_else(|| format!("unknown task group `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Ood,
}

/// One row of the instruction-tuning corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub task_id: String,
    pub task_group: TaskGroup,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_selfies: Option<String>,
    pub target: String,
    pub source: String,
    pub split: Split,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("record {index}: input molecule: {source}")]
    Molecule { index: usize, source: MolError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl InstructionRecord {
    /// Checks the schema invariants: non-empty target and a decodable input
    /// molecule when one is given.
    pub fn check(&self) -> Result<(), String> {
        if self.target.is_empty() {
            return Err("empty target".into());
        }
        if let Some(s) = &self.input_selfies {
            parse_selfies(s).map_err(|e| format!("input_selfies: {e}"))?;
        }
        Ok(())
    }

    pub fn input_graph(&self) -> Option<Result<MolGraph, MolError>> {
        self.input_selfies.as_deref().map(parse_selfies)
    }

    /// The molecule a record is about: its input, or for molecule-generation
    /// rows without input, its target. Returns `None` when neither decodes
    /// to a molecule.
    pub fn key_graph(&self) -> Option<MolGraph> {
        match &self.input_selfies {
            Some(s) => parse_selfies(s).ok(),
            None if self.task_group == TaskGroup::Molgen => parse_selfies(&self.target).ok(),
            None => None,
        }
        .filter(|g| !g.is_empty())
    }

    /// Canonical SMILES of [`key_graph`](Self::key_graph).
    pub fn molecule_key(&self) -> Option<String> {
        self.key_graph().map(|g| canonical_smiles(&g))
    }
}

/// Reads JSONL records, validating each line.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<InstructionRecord>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstructionRecord =
            serde_json::from_str(&line).map_err(|e| RecordError::Schema { line: i + 1, message: e.to_string() })?;
        rec.check().map_err(|message| RecordError::Schema { line: i + 1, message })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut writer: W, records: &[InstructionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(selfies: Option<&str>) -> InstructionRecord {
        InstructionRecord {
            task_id: "t".into(),
            task_group: TaskGroup::PropertyRegression,
            instruction: "predict".into(),
            input_selfies: selfies.map(String::from),
            target: "1.0".into(),
            source: "s".into(),
            split: Split::Train,
        }
    }

    #[test]
    fn json_field_names() {
        let text = serde_json::to_string(&rec(Some("[C][O]"))).unwrap();
        assert_eq!(
            text,
            r#"{"task_id":"t","task_group":"property_regression","instruction":"predict","input_selfies":"[C][O]","target":"1.0","source":"s","split":"train"}"#
        );
        let back: InstructionRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec(Some("[C][O]")));
        assert!(!serde_json::to_string(&rec(None)).unwrap().contains("input_selfies"));
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let good = serde_json::to_string(&rec(None)).unwrap();
        let text = format!("{good}\n{}\n", good.replace("property_regression", "docking"));
        match read_records(text.as_bytes()) {
            Err(RecordError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let mut empty_target = rec(None);
        empty_target.target.clear();
        assert!(empty_target.check().is_err());
        assert!(rec(Some("[Xx]")).check().is_err());
    }

    #[test]
    fn molecule_keys() {
        assert_eq!(rec(Some("[O][C][C]")).molecule_key(), rec(Some("[C][C][O]")).molecule_key());
        assert_eq!(rec(None).molecule_key(), None);
        let mut gen = rec(None);
        gen.task_group = TaskGroup::Molgen;
        gen.target = "[C][C][O]".into();
        assert_eq!(gen.molecule_key().as_deref(), Some("CCO"));
    }
}
