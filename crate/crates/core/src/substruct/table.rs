use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Pattern, PatternError};
use crate::fingerprint::Fingerprint;
use crate::molgraph::MolGraph;

pub const FUNCTIONAL_GROUP_COUNT: usize = 72;

const MACCS_TSV: &str = include_str!("../../data/maccs_keys.tsv");
const GROUPS_TSV: &str = include_str!("../../data/functional_groups.tsv");

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: {source}")]
    Pattern { line: usize, source: PatternError },
    #[error("key indices are not dense: expected {expected}, found {found}")]
    Indices { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct KeyEntry {
    pub index: usize,
    pub pattern: Pattern,
}

/// An ordered list of patterns; entry `k` owns bit `k`.
#[derive(Debug, Clone)]
pub struct KeyTable {
    version: String,
    entries: Vec<KeyEntry>,
}

impl KeyTable {
    /// Parses the line format `index<TAB>name<TAB>pattern`. The first line
    /// must be a `#!version<TAB>...` header; other `#` lines are comments.
    pub fn parse(text: &str) -> Result<KeyTable, TableError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(TableError::Format { line: 1, message: "empty table".into() })?;
        let version = header
            .strip_prefix("#!version\t")
            .ok_or(TableError::Format { line: 1, message: "missing `#!version` header".into() })?
            .split('\t')
            .next()
            .unwrap_or_default()
            .to_string();
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(TableError::Format { line: line_no, message: "expected 3 tab-separated fields".into() });
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| TableError::Format { line: line_no, message: format!("bad index `{}`", fields[0]) })?;
            if index != entries.len() {
                return Err(TableError::Indices { expected: entries.len(), found: index });
            }
            let pattern =
                Pattern::parse(fields[1], fields[2]).map_err(|source| TableError::Pattern { line: line_no, source })?;
            entries.push(KeyEntry { index, pattern });
        }
        Ok(KeyTable { version, entries })
    }

    pub fn load(path: &std::path::Path) -> Result<KeyTable, TableError> {
        KeyTable::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_patterns(version: &str, patterns: Vec<Pattern>) -> KeyTable {
        let entries = patterns.into_iter().enumerate().map(|(index, pattern)| KeyEntry { index, pattern }).collect();
        KeyTable { version: version.to_string(), entries }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn width(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[KeyEntry] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &KeyEntry {
        &self.entries[k]
    }
}

/// The shipped structural key table.
pub fn maccs_table() -> &'static KeyTable {
    static TABLE: OnceLock<KeyTable> = OnceLock::new();
    TABLE.get_or_init(|| KeyTable::parse(MACCS_TSV).expect("shipped key table parses"))
}

/// The shipped functional-group table.
pub fn functional_group_table() -> &'static KeyTable {
    static TABLE: OnceLock<KeyTable> = OnceLock::new();
    TABLE.get_or_init(|| KeyTable::parse(GROUPS_TSV).expect("shipped group table parses"))
}

/// Key fingerprint with the present and absent key lists.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPresence {
    pub fingerprint: Fingerprint,
    pub present: Vec<usize>,
    pub absent: Vec<usize>,
}

pub fn maccs_keys(g: &MolGraph, table: &KeyTable) -> KeyPresence {
    let mut fingerprint = Fingerprint::new(table.width());
    let mut present = Vec::new();
    let mut absent = Vec::new();
    for entry in table.entries() {
        if entry.pattern.is_match(g) {
            fingerprint.set(entry.index);
            present.push(entry.index);
        } else {
            absent.push(entry.index);
        }
    }
    KeyPresence { fingerprint, present, absent }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalGroupLabel {
    pub bits: Vec<u8>,
}

impl FunctionalGroupLabel {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }
}

pub fn functional_groups(g: &MolGraph) -> FunctionalGroupLabel {
    functional_groups_with(g, functional_group_table())
}

pub fn functional_groups_with(g: &MolGraph, table: &KeyTable) -> FunctionalGroupLabel {
    FunctionalGroupLabel { bits: table.entries().iter().map(|e| e.pattern.is_match(g) as u8).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn shipped_tables_load() {
        assert!(maccs_table().width() >= 64);
        assert_eq!(functional_group_table().width(), FUNCTIONAL_GROUP_COUNT);
        let with_template = maccs_table().entries().iter().filter(|e| e.pattern.template().is_some()).count();
        assert!(with_template * 10 >= maccs_table().width() * 9, "{with_template}");
    }

    #[test]
    fn header_is_required() {
        assert!(KeyTable::parse("0\thydroxyl\t[OH1]\n").is_err());
        let t = KeyTable::parse("#!version\ttest-1\n0\thydroxyl\t[OX2H1]\n1\tcarbonyl\t[#6]=O\n").unwrap();
        assert_eq!((t.version(), t.width()), ("test-1", 2));
        assert!(KeyTable::parse("#!version\tv\n1\tx\tC\n").is_err());
    }

    #[test]
    fn two_key_example() {
        let t = KeyTable::parse("#!version\ttest-1\n0\thydroxyl\t[OX2H1]\n1\tcarbonyl\t[#6]=O\n").unwrap();
        let k = maccs_keys(&parse_smiles("CCO").unwrap(), &t);
        assert_eq!(k.present, vec![0]);
        assert_eq!(k.absent, vec![1]);
        assert_eq!(k.fingerprint.ones(), vec![0]);
        let empty = KeyTable::from_patterns("none", Vec::new());
        assert_eq!(maccs_keys(&parse_smiles("CCO").unwrap(), &empty).fingerprint.count_ones(), 0);
    }

    #[test]
    fn group_labels() {
        let names: Vec<&str> = functional_group_table().entries().iter().map(|e| e.pattern.name()).collect();
        assert!(!names.contains(&"tertiary_amine"));
        assert!(functional_groups(&parse_smiles("C").unwrap()).bits.iter().all(|&b| b == 0));
        let k = names.iter().position(|&n| n == "primary_aromatic_amine").unwrap();
        assert_eq!(functional_groups(&parse_smiles("Nc1ccccc1").unwrap()).bits[k], 1);
    }
}
