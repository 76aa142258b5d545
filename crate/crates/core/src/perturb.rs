//! Preference pairs built by removing and adding key substructures.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::InstructionRecord;
use crate::fingerprint::hash_values;
use crate::molgraph::{parse_selfies, to_selfies, Atom, Bond, BondOrder, MolError, MolGraph};
use crate::substruct::{maccs_keys, KeyTable};

#[derive(Debug, thiserror::Error)]
pub enum PerturbError {
    #[error("cannot perturb an empty molecule")]
    EmptyMolecule,
    #[error("key table is empty")]
    EmptyTable,
    #[error("ratio {0} outside [0, 1]")]
    Ratio(f64),
    #[error("record has no input molecule")]
    NoInput,
    #[error(transparent)]
    Molecule(#[from] MolError),
}

/// What a perturbation did. Key indices refer to the key table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbLog {
    pub present: usize,
    pub selected: usize,
    pub removal_keys: Vec<usize>,
    pub addition_keys: Vec<usize>,
    pub removed: Vec<usize>,
    pub added: Vec<usize>,
}

/// Number of keys selected for each of removal and addition:
/// `ceil(ratio · present)`. The small slack keeps products such as
/// 0.3 · 10 from rounding up past the exact integer.
pub fn selection_count(ratio: f64, present: usize) -> usize {
    ((ratio * present as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Derives an independent per-record seed.
pub fn record_seed(global_seed: u64, record_id: u64) -> u64 {
    hash_values(&[global_seed, record_id])
}

pub fn perturb_graph(g: &MolGraph, table: &KeyTable, ratio: f64, seed: u64) -> Result<MolGraph, PerturbError> {
    perturb_graph_logged(g, table, ratio, seed).map(|(g, _)| g)
}

/// Removes the atoms of `n` sampled present keys, then attaches the template
/// fragments of `n` sampled absent keys, each by one single bond. Steps that
/// would empty the molecule or break valence are skipped.
pub fn perturb_graph_logged(
    g: &MolGraph,
    table: &KeyTable,
    ratio: f64,
    seed: u64,
) -> Result<(MolGraph, PerturbLog), PerturbError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(PerturbError::Ratio(ratio));
    }
    if g.is_empty() {
        return Err(PerturbError::EmptyMolecule);
    }
    if table.is_empty() {
        return Err(PerturbError::EmptyTable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = maccs_keys(g, table);
    let n = selection_count(ratio, keys.present.len());
    let mut log = PerturbLog { present: keys.present.len(), selected: n, ..Default::default() };
    if n == 0 {
        return Ok((g.clone(), log));
    }
    log.removal_keys = sample(&mut rng, keys.present.len(), n).into_iter().map(|i| keys.present[i]).collect();
    let n_add = n.min(keys.absent.len());
    log.addition_keys = sample(&mut rng, keys.absent.len(), n_add).into_iter().map(|i| keys.absent[i]).collect();

    let mut remove = vec![false; g.atom_count()];
    for &k in &log.removal_keys {
        let embeddings = table.entry(k).pattern.matches(g);
        if embeddings.is_empty() {
            continue;
        }
        let pick = &embeddings[rng.gen_range(0..embeddings.len())];
        let mut trial = remove.clone();
        for &a in pick {
            trial[a] = true;
        }
        if trial.iter().all(|&r| r) {
            continue;
        }
        remove = trial;
        log.removed.push(k);
    }
    let mut current = if remove.iter().any(|&r| r) { g.without_atoms(&remove)? } else { g.clone() };

    for &k in &log.addition_keys {
        let Some(template) = table.entry(k).pattern.template() else { continue };
        if let Some(next) = attach(&current, template, &mut rng) {
            current = next;
            log.added.push(k);
        }
    }
    Ok((current, log))
}

/// Joins `fragment` to a random host atom with spare valence through a
/// random fragment atom with spare valence.
fn attach<R: Rng>(host: &MolGraph, fragment: &MolGraph, rng: &mut R) -> Option<MolGraph> {
    let host_k = host.kekulize().ok()?;
    let frag_k = fragment.kekulize().ok()?;
    let spare = |g: &MolGraph| (0..g.atom_count()).filter(|&i| g.atom(i).explicit_h > 0).collect::<Vec<_>>();
    let (hs, fs) = (spare(&host_k), spare(&frag_k));
    if hs.is_empty() || fs.is_empty() {
        return None;
    }
    let h = hs[rng.gen_range(0..hs.len())];
    let f = fs[rng.gen_range(0..fs.len())];
    let joined = host_k.disjoint_union(&frag_k);
    let offset = host_k.atom_count();
    let mut atoms: Vec<Atom> = joined.atoms().to_vec();
    let mut bonds: Vec<Bond> = joined.bonds().to_vec();
    atoms[h].explicit_h -= 1;
    atoms[offset + f].explicit_h -= 1;
    bonds.push(Bond { a: h, b: offset + f, order: BondOrder::Single });
    let out = MolGraph::from_kekule(atoms, bonds).ok()?;
    out.validate().ok()?;
    Some(out)
}

/// A chosen/rejected graph pair with the record fields it came from.
#[derive(Debug, Clone)]
pub struct PreferencePair {
    pub chosen: MolGraph,
    pub rejected: MolGraph,
    pub selfies: String,
    pub instruction: String,
    pub target: String,
    pub task_id: String,
    pub log: PerturbLog,
}

pub fn make_pair(record: &InstructionRecord, table: &KeyTable, ratio: f64, seed: u64) -> Result<PreferencePair, PerturbError> {
    let selfies = record.input_selfies.as_deref().ok_or(PerturbError::NoInput)?;
    let chosen = parse_selfies(selfies)?;
    let (rejected, log) = perturb_graph_logged(&chosen, table, ratio, seed)?;
    Ok(PreferencePair {
        chosen,
        rejected,
        selfies: selfies.to_string(),
        instruction: record.instruction.clone(),
        target: record.target.clone(),
        task_id: record.task_id.clone(),
        log,
    })
}

/// JSONL row of a preference pair: the source record plus the rejected
/// molecule and the perturbation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    #[serde(flatten)]
    pub record: InstructionRecord,
    pub rejected_selfies: String,
    pub perturb_log: PerturbLog,
}

impl PairRecord {
    pub fn new(record: InstructionRecord, pair: &PreferencePair) -> Result<PairRecord, MolError> {
        Ok(PairRecord { record, rejected_selfies: to_selfies(&pair.rejected)?, perturb_log: pair.log.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Split, TaskGroup};
    use crate::molgraph::{canonical_smiles, parse_smiles};
    use crate::substruct::maccs_table;

    #[test]
    fn selection_counts() {
        assert_eq!(selection_count(0.3, 10), 3);
        assert_eq!(selection_count(0.3, 11), 4);
        assert_eq!(selection_count(0.0, 10), 0);
        assert_eq!(selection_count(1.0, 7), 7);
        assert_eq!(selection_count(0.3, 1), 1);
    }

    #[test]
    fn ratio_zero_is_identity() {
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let out = perturb_graph(&g, maccs_table(), 0.0, 7).unwrap();
        assert_eq!(canonical_smiles(&out), canonical_smiles(&g));
    }

    #[test]
    fn deterministic_and_valid() {
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let (a, log) = perturb_graph_logged(&g, maccs_table(), 0.3, 11).unwrap();
        let b = perturb_graph(&g, maccs_table(), 0.3, 11).unwrap();
        assert_eq!(canonical_smiles(&a), canonical_smiles(&b));
        a.validate().unwrap();
        assert_eq!(log.removal_keys.len(), selection_count(0.3, log.present));
        assert_ne!(canonical_smiles(&a), canonical_smiles(&g));
    }

    #[test]
    fn single_atom_only_gains() {
        let g = parse_smiles("C").unwrap();
        let (out, log) = perturb_graph_logged(&g, maccs_table(), 0.3, 3).unwrap();
        assert!(log.removed.is_empty());
        out.validate().unwrap();
        assert!(out.atom_count() >= 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(perturb_graph(&MolGraph::empty(), maccs_table(), 0.3, 0), Err(PerturbError::EmptyMolecule)));
        let empty = KeyTable::from_patterns("none", vec![]);
        assert!(matches!(perturb_graph(&parse_smiles("C").unwrap(), &empty, 0.3, 0), Err(PerturbError::EmptyTable)));
        assert!(matches!(perturb_graph(&parse_smiles("C").unwrap(), maccs_table(), 1.5, 0), Err(PerturbError::Ratio(_))));
        let rec = InstructionRecord {
            task_id: "t".into(),
            task_group: TaskGroup::Molgen,
            instruction: "q".into(),
            input_selfies: Some("[C][Xx]".into()),
            target: "y".into(),
            source: "s".into(),
            split: Split::Train,
        };
        assert!(make_pair(&rec, maccs_table(), 0.3, 0).is_err());
    }
}
