use std::collections::{BTreeMap, HashMap, HashSet};

use super::{InstructionRecord, Split};
use crate::molgraph::{canonical_smiles, murcko_scaffold, MolGraph};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupReport {
    pub dropped: usize,
    pub kept: usize,
}

/// Removes training rows whose molecule also appears in the test split of
/// the same task. Rows of other tasks, and rows without a molecule, are
/// untouched.
pub fn dedup(records: Vec<InstructionRecord>) -> (Vec<InstructionRecord>, DedupReport) {
    let keys: Vec<Option<String>> = records.iter().map(|r| r.molecule_key()).collect();
    let mut test_keys: HashSet<(&str, &str)> = HashSet::new();
    for (r, k) in records.iter().zip(&keys) {
        if let (Split::Test, Some(k)) = (r.split, k) {
            test_keys.insert((r.task_id.as_str(), k.as_str()));
        }
    }
    let drop: Vec<bool> = records
        .iter()
        .zip(&keys)
        .map(|(r, k)| {
            r.split == Split::Train && k.as_ref().is_some_and(|k| test_keys.contains(&(r.task_id.as_str(), k.as_str())))
        })
        .collect();
    let dropped = drop.iter().filter(|&&d| d).count();
    let kept: Vec<InstructionRecord> =
        records.into_iter().zip(drop).filter(|(_, d)| !d).map(|(r, _)| r).collect();
    let report = DedupReport { dropped, kept: kept.len() };
    (kept, report)
}

/// Canonical SMILES of the Murcko scaffold, per fragment, sorted and joined
/// with `.`. Acyclic molecules give the empty string.
pub fn scaffold_key(g: &MolGraph) -> String {
    canonical_smiles(&murcko_scaffold(g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub train: Vec<InstructionRecord>,
    pub test: Vec<InstructionRecord>,
    pub train_groups: usize,
    pub test_groups: usize,
    pub warnings: Vec<String>,
}

/// Scaffold split. Records are grouped by scaffold; groups are visited
/// largest first (ties by scaffold text) and go to train while more than
/// `test_fraction` of the records are still unassigned.
///
/// Records without a molecule share the empty-scaffold group.
pub fn scaffold_split(records: Vec<InstructionRecord>, test_fraction: f64) -> SplitOutcome {
    let n = records.len();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = r.key_graph().map(|g| scaffold_key(&g)).unwrap_or_default();
        groups.entry(key).or_default().push(i);
    }
    let mut order: Vec<(String, Vec<usize>)> = groups.into_iter().collect();
    order.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));

    let mut side = vec![Split::Test; n];
    let mut remaining = n;
    let (mut train_groups, mut test_groups) = (0, 0);
    for (_, members) in &order {
        if remaining as f64 > test_fraction * n as f64 + 1e-9 {
            for &i in members {
                side[i] = Split::Train;
            }
            remaining -= members.len();
            train_groups += 1;
        } else {
            test_groups += 1;
        }
    }
    let mut warnings = Vec::new();
    if n > 0 && test_groups == 0 && test_fraction > 0.0 {
        warnings.push(format!("all {n} records fall in {train_groups} scaffold group(s); test split is empty"));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (mut r, s) in records.into_iter().zip(side) {
        r.split = s;
        if s == Split::Train {
            train.push(r);
        } else {
            test.push(r);
        }
    }
    SplitOutcome { train, test, train_groups, test_groups, warnings }
}

/// Applies [`scaffold_split`] to each task separately, preserving the
/// first-seen task order.
pub fn scaffold_split_per_task(records: Vec<InstructionRecord>, test_fraction: f64) -> SplitOutcome {
    let mut tasks: Vec<String> = Vec::new();
    let mut by_task: HashMap<String, Vec<InstructionRecord>> = HashMap::new();
    for r in records {
        if !by_task.contains_key(&r.task_id) {
            tasks.push(r.task_id.clone());
        }
        by_task.entry(r.task_id.clone()).or_default().push(r);
    }
    let mut all = SplitOutcome { train: vec![], test: vec![], train_groups: 0, test_groups: 0, warnings: vec![] };
    for t in tasks {
        let part = scaffold_split(by_task.remove(&t).unwrap_or_default(), test_fraction);
        all.train.extend(part.train);
        all.test.extend(part.test);
        all.train_groups += part.train_groups;
        all.test_groups += part.test_groups;
        all.warnings.extend(part.warnings.into_iter().map(|w| format!("task {t}: {w}")));
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskGroup;
    use crate::molgraph::{parse_smiles, to_selfies};

    fn rec(task: &str, smiles: &str, split: Split) -> InstructionRecord {
        InstructionRecord {
            task_id: task.into(),
            task_group: TaskGroup::PropertyClassification,
            instruction: "q".into(),
            input_selfies: Some(to_selfies(&parse_smiles(smiles).unwrap()).unwrap()),
            target: "True".into(),
            source: "unit".into(),
            split,
        }
    }

    #[test]
    fn dedup_rules() {
        let records = vec![
            rec("a", "CCO", Split::Train),
            rec("a", "OCC", Split::Test),
            rec("b", "CCO", Split::Train),
            rec("a", "CCN", Split::Train),
        ];
        let (kept, report) = dedup(records.clone());
        assert_eq!(report, DedupReport { dropped: 1, kept: 3 });
        assert_eq!(kept, vec![records[1].clone(), records[2].clone(), records[3].clone()]);
        let disjoint = vec![rec("a", "CCO", Split::Train), rec("a", "CCN", Split::Test)];
        assert_eq!(dedup(disjoint.clone()).0, disjoint);
    }

    #[test]
    fn equal_groups_split_by_count() {
        let scaffolds = [
            "c1ccccc1", "C1CCCCC1", "C1CCCC1", "c1ccncc1", "C1CCNCC1", "C1CCOCC1", "c1ccoc1", "c1ccsc1", "C1CC1",
            "C1CCC1",
        ];
        let mut records = Vec::new();
        for s in scaffolds {
            for tail in ["C", "CC", "CCC", "CO", "CN"] {
                records.push(rec("t", &format!("{tail}{s}"), Split::Train));
            }
        }
        let out = scaffold_split(records, 0.2);
        assert_eq!((out.train_groups, out.test_groups), (8, 2));
        assert_eq!((out.train.len(), out.test.len()), (40, 10));
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn degenerate_split_warns() {
        let records: Vec<_> = ["Cc1ccccc1", "Oc1ccccc1", "Nc1ccccc1"].iter().map(|s| rec("t", s, Split::Train)).collect();
        let out = scaffold_split(records, 0.2);
        assert_eq!((out.train.len(), out.test.len()), (3, 0));
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn acyclic_share_one_group() {
        let records: Vec<_> = ["CCO", "CCCC", "CN"].iter().map(|s| rec("t", s, Split::Train)).collect();
        let out = scaffold_split(records, 0.5);
        assert_eq!(out.train_groups + out.test_groups, 1);
    }
}
