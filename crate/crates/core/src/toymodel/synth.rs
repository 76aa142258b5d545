//! Synthetic data for the toy model: a preference task that only the graph
//! can solve, and random molecules with functional-group labels for
//! pre-training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::ToyModel;
use super::train::{evaluate_gdr, pair_examples, pair_vocab, train_pairs, TrainConfig, TrainError, TrainMode};
use crate::dataset::{InstructionRecord, Split, TaskGroup};
use crate::fingerprint::hash_values;
use crate::molpo::MolpoConfig;
use crate::molgraph::random::{random_molecule, random_smiles, RandomMolConfig};
use crate::molgraph::{parse_smiles, to_selfies, Element, MolGraph};
use crate::perturb::{PairRecord, PerturbLog};
use crate::substruct::functional_groups;

pub const SYNTH_TASK: &str = "synthetic_marker";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub pairs: usize,
    pub seed: u64,
    pub min_atoms: usize,
    pub max_atoms: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { pairs: 400, seed: 0, min_atoms: 4, max_atoms: 14 }
    }
}

/// Marker atom for each value of the hidden bit.
const MARKERS: [Element; 2] = [Element::CL, Element::BR];
const ANSWERS: [&str; 2] = ["beta", "alpha"];

/// Substituent of the chosen molecule and the isomeric group that replaces
/// it in the rejected one. Both sides have the same atoms.
const SUBSTITUTIONS: [(&str, &str); 6] = [
    ("CCO", "OCC"),
    ("CC(=O)C", "C(=O)CC"),
    ("C(=O)OC", "OC(=O)C"),
    ("CCN", "NCC"),
    ("C(C)(C)C", "CCCC"),
    ("C1CC1", "C=CC"),
];

fn has_marker(g: &MolGraph) -> bool {
    g.atoms().iter().any(|a| MARKERS.contains(&a.element))
}

/// Pairs whose target is a fixed function of a hidden bit: which halogen
/// marker the molecule carries. The rejected graph swaps one substituent
/// for an isomer and keeps the marker, so it implies the same target, and
/// only the graph can tell the two apart. The SELFIES field spells the
/// marker, so the trainer must leave SELFIES tokens out of the context for
/// the bit to stay hidden from the text.
pub fn synthetic_pairs(cfg: &SynthConfig) -> Vec<PairRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rc = RandomMolConfig { min_atoms: cfg.min_atoms, max_atoms: cfg.max_atoms, charge_prob: 0.0, fragment_prob: 0.0 };
    let mut out = Vec::with_capacity(cfg.pairs);
    while out.len() < cfg.pairs {
        let bit = rng.gen_range(0..2usize);
        let skeleton = random_molecule(&mut rng, &rc);
        if has_marker(&skeleton) {
            continue;
        }
        let core = format!("{}{}", MARKERS[bit].symbol(), random_smiles(&mut rng, &skeleton));
        let (w, l) = SUBSTITUTIONS[rng.gen_range(0..SUBSTITUTIONS.len())];
        let (Ok(chosen), Ok(rejected)) = (parse_smiles(&format!("{core}{w}")), parse_smiles(&format!("{core}{l}"))) else {
            continue;
        };
        if chosen.validate().is_err() || rejected.validate().is_err() {
            continue;
        }
        let (Ok(w), Ok(l)) = (to_selfies(&chosen), to_selfies(&rejected)) else { continue };
        let record = InstructionRecord {
            task_id: SYNTH_TASK.to_string(),
            task_group: TaskGroup::PropertyClassification,
            instruction: "name the marker class".to_string(),
            input_selfies: Some(w),
            target: format!("class {}", ANSWERS[bit]),
            source: "synthetic".to_string(),
            split: Split::Train,
        };
        out.push(PairRecord { record, rejected_selfies: l, perturb_log: PerturbLog::default() });
    }
    out
}

/// Random molecules with their functional-group labels.
pub fn synthetic_molecules(n: usize, seed: u64) -> Vec<(MolGraph, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RandomMolConfig { min_atoms: 4, max_atoms: 18, charge_prob: 0.0, fragment_prob: 0.0 };
    (0..n)
        .map(|_| {
            let g = random_molecule(&mut rng, &cfg);
            let labels = functional_groups(&g).bits;
            (g, labels)
        })
        .collect()
}

/// Training settings for the synthetic task. SELFIES tokens stay out of the
/// context, and the preference term is weighted up because the SFT loss of
/// a two-word target saturates within a few hundred steps.
pub fn synthetic_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        steps: 600,
        seed,
        use_selfies_tokens: false,
        trace_every: 50,
        molpo: MolpoConfig { c: 1.0, beta: 20.0, ..MolpoConfig::default() },
        ..TrainConfig::default()
    }
}

/// Held-out GDR after training the same initial model both ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationOutcome {
    pub seed: u64,
    pub sft_only: f64,
    pub sft_plus_molpo: f64,
}

/// Trains `sft_only` and `sft_plus_molpo` on `n_train` synthetic pairs and
/// scores both on `n_test` fresh ones.
pub fn gdr_ablation(seed: u64, n_train: usize, n_test: usize, cfg: &TrainConfig) -> Result<AblationOutcome, TrainError> {
    let train = synthetic_pairs(&SynthConfig { pairs: n_train, seed, ..SynthConfig::default() });
    let test = synthetic_pairs(&SynthConfig { pairs: n_test, seed: hash_values(&[seed, 1]), ..SynthConfig::default() });
    let all: Vec<PairRecord> = train.iter().chain(&test).cloned().collect();
    let vocab = pair_vocab(&all, cfg.use_selfies_tokens)?;
    let train = pair_examples(&train, &vocab, cfg.use_selfies_tokens)?;
    let test = pair_examples(&test, &vocab, cfg.use_selfies_tokens)?;
    let mut gdr = [0.0; 2];
    for (slot, mode) in [TrainMode::SftOnly, TrainMode::SftPlusMolpo].into_iter().enumerate() {
        let mut model = ToyModel::init(cfg.model, vocab.clone(), seed);
        train_pairs(&mut model, &train, mode, cfg)?;
        gdr[slot] = evaluate_gdr(&model, &test)?;
    }
    Ok(AblationOutcome { seed, sft_only: gdr[0], sft_plus_molpo: gdr[1] })
}
