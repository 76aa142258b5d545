use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::split::{scaffold_key, scaffold_split, SplitOutcome};
use super::{InstructionRecord, Split, TaskGroup};
use crate::molgraph::{canonical_smiles, parse_selfies, parse_smiles, to_selfies, MolError, MolGraph};

/// Solubility labels for one molecule, one value per source dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSolubility {
    pub molecule_key: String,
    pub labels: Vec<f64>,
}

/// Raw measurement row: a SMILES string, a LogS value and its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolubilityRow {
    pub smiles: String,
    pub logs: f64,
    pub source: String,
}

/// Groups rows by canonical SMILES. A source contributes at most one label
/// per molecule (its first row). Unparseable rows are returned separately.
pub fn merge_solubility(rows: &[SolubilityRow]) -> (Vec<LabeledSolubility>, Vec<usize>) {
    let mut by_key: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut bad = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        match parse_smiles(&row.smiles) {
            Ok(g) => {
                let labels = by_key.entry(canonical_smiles(&g)).or_default();
                if !labels.iter().any(|(s, _)| *s == row.source) {
                    labels.push((row.source.clone(), row.logs));
                }
            }
            Err(_) => bad.push(i),
        }
    }
    let merged = by_key
        .into_iter()
        .map(|(molecule_key, labels)| LabeledSolubility { molecule_key, labels: labels.into_iter().map(|l| l.1).collect() })
        .collect();
    (merged, bad)
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub const OOD_LOGS_TASK: &str = "ood_logs";

/// Keeps molecules outside `exclude_keys` whose labels are unique or agree
/// to a sample standard deviation below `std_max`; the target is the mean.
pub fn ood_solubility_filter(
    entries: &[LabeledSolubility],
    exclude_keys: &HashSet<String>,
    std_max: f64,
) -> Result<Vec<InstructionRecord>, MolError> {
    let mut out = Vec::new();
    for e in entries {
        if e.labels.is_empty() || exclude_keys.contains(&e.molecule_key) {
            continue;
        }
        if e.labels.len() > 1 && sample_std(&e.labels) >= std_max {
            continue;
        }
        let mean = e.labels.iter().sum::<f64>() / e.labels.len() as f64;
        let g = parse_smiles(&e.molecule_key)?;
        out.push(InstructionRecord {
            task_id: OOD_LOGS_TASK.into(),
            task_group: TaskGroup::PropertyRegression,
            instruction: "Predict the aqueous solubility (LogS) of the molecule.".into(),
            input_selfies: Some(to_selfies(&g)?),
            target: format!("{mean:.4}"),
            source: "aqsol".into(),
            split: Split::Ood,
        });
    }
    Ok(out)
}

fn fragment_scaffolds(g: &MolGraph) -> Vec<String> {
    g.fragments().iter().map(|f| scaffold_key(&g.induced(f))).filter(|s| !s.is_empty()).collect()
}

/// Non-empty scaffolds of every input fragment of the given records.
pub fn input_scaffolds(records: &[InstructionRecord]) -> HashSet<String> {
    records
        .iter()
        .filter_map(|r| r.input_selfies.as_deref())
        .filter_map(|s| parse_selfies(s).ok())
        .flat_map(|g| fragment_scaffolds(&g))
        .collect()
}

/// Identity of a reaction row: canonical input and target.
pub fn reaction_key(r: &InstructionRecord) -> String {
    let side = |s: &str| parse_selfies(s).map(|g| canonical_smiles(&g)).unwrap_or_else(|_| s.to_string());
    format!("{}>>{}", r.input_selfies.as_deref().map(side).unwrap_or_default(), side(&r.target))
}

/// Drops candidates with any input scaffold seen among the training inputs,
/// then scaffold-splits the rest. Acyclic fragments carry no scaffold and
/// never cause an overlap.
pub fn ood_reaction_filter(
    candidates: Vec<InstructionRecord>,
    train_scaffolds: &HashSet<String>,
    test_fraction: f64,
) -> Result<(SplitOutcome, usize), MolError> {
    let mut kept = Vec::new();
    let mut removed = 0;
    for r in candidates {
        let g = match r.input_graph() {
            Some(g) => g?,
            None => MolGraph::empty(),
        };
        if fragment_scaffolds(&g).iter().any(|s| train_scaffolds.contains(s)) {
            removed += 1;
        } else {
            kept.push(r);
        }
    }
    Ok((scaffold_split(kept, test_fraction), removed))
}

/// Forward synthesis is extracted first; retrosynthesis candidates whose
/// reaction already appears (reversed) in the forward set are skipped.
pub fn ood_reaction_sets(
    forward: Vec<InstructionRecord>,
    retro: Vec<InstructionRecord>,
    train_scaffolds: &HashSet<String>,
    test_fraction: f64,
) -> Result<(SplitOutcome, SplitOutcome), MolError> {
    let (fs, _) = ood_reaction_filter(forward, train_scaffolds, test_fraction)?;
    let used: HashSet<String> = fs.train.iter().chain(&fs.test).map(|r| {
        let k = reaction_key(r);
        let (a, b) = k.split_once(">>").unwrap_or((&k, ""));
        format!("{b}>>{a}")
    }).collect();
    let retro: Vec<_> = retro.into_iter().filter(|r| !used.contains(&reaction_key(r))).collect();
    let (rs, _) = ood_reaction_filter(retro, train_scaffolds, test_fraction)?;
    Ok((fs, rs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(labels: &[f64]) -> LabeledSolubility {
        LabeledSolubility { molecule_key: "CCO".into(), labels: labels.to_vec() }
    }

    #[test]
    fn solubility_std_rule() {
        let none = HashSet::new();
        assert_eq!(ood_solubility_filter(&[entry(&[-3.1])], &none, 0.1).unwrap().len(), 1);
        let tight = [-3.10, -3.15];
        assert!((sample_std(&tight) - 0.035355339059327).abs() < 1e-9);
        let kept = ood_solubility_filter(&[entry(&tight)], &none, 0.1).unwrap();
        assert_eq!(kept[0].target, "-3.1250");
        assert!(ood_solubility_filter(&[entry(&[-3.0, -3.5])], &none, 0.1).unwrap().is_empty());
        let excluded: HashSet<String> = ["CCO".to_string()].into();
        assert!(ood_solubility_filter(&[entry(&[-3.1])], &excluded, 0.1).unwrap().is_empty());
    }

    #[test]
    fn merge_keeps_one_label_per_source() {
        let row = |s: &str, v: f64, src: &str| SolubilityRow { smiles: s.into(), logs: v, source: src.into() };
        let (merged, bad) =
            merge_solubility(&[row("CCO", -1.0, "a"), row("OCC", -1.2, "b"), row("OCC", -9.0, "a"), row("C(", 0.0, "a")]);
        assert_eq!(bad, vec![3]);
        assert_eq!(merged, vec![LabeledSolubility { molecule_key: "CCO".into(), labels: vec![-1.0, -1.2] }]);
    }

    fn rxn(input: &str, product: &str) -> InstructionRecord {
        InstructionRecord {
            task_id: "fs".into(),
            task_group: TaskGroup::Reaction,
            instruction: "predict the product".into(),
            input_selfies: Some(to_selfies(&parse_smiles(input).unwrap()).unwrap()),
            target: to_selfies(&parse_smiles(product).unwrap()).unwrap(),
            source: "orderly".into(),
            split: Split::Train,
        }
    }

    #[test]
    fn reaction_overlap() {
        let train = vec![rxn("Cc1ccccc1.O", "Oc1ccccc1")];
        let seen = input_scaffolds(&train);
        assert!(seen.contains("c1ccccc1"));
        let (out, removed) =
            ood_reaction_filter(vec![rxn("Nc1ccccc1.CC(=O)Cl", "CC(=O)Nc1ccccc1"), rxn("C1CCNCC1.CCBr", "CCN1CCCCC1")], &seen, 0.0)
                .unwrap();
        assert_eq!(removed, 1);
        assert_eq!(out.train.len() + out.test.len(), 1);
    }

    #[test]
    fn retro_skips_forward_reactions() {
        let fwd = vec![rxn("C1CCNCC1.CCBr", "CCN1CCCCC1")];
        let mut back = rxn("CCN1CCCCC1", "C1CCNCC1.CCBr");
        back.task_id = "rs".into();
        let other = rxn("C1CCOC1", "OCCCCO");
        let (fs, rs) = ood_reaction_sets(fwd, vec![back, other], &HashSet::new(), 0.0).unwrap();
        assert_eq!(fs.train.len(), 1);
        assert_eq!(rs.train.len(), 1);
    }
}
