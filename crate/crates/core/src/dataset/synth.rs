use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{InstructionRecord, Split, TaskGroup};
use crate::molgraph::random::{random_molecule, RandomMolConfig};
use crate::molgraph::to_selfies;

/// A mixed-task corpus for exercising the pipeline. Records draw their
/// molecule from a pool a quarter the size of the corpus, so the same
/// molecule recurs within and across tasks and across the given splits.
/// Roughly one row in five is marked as test.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<InstructionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RandomMolConfig { min_atoms: 3, max_atoms: 20, ..RandomMolConfig::default() };
    let pool: Vec<String> = (0..(n / 4).max(1))
        .map(|_| to_selfies(&random_molecule(&mut rng, &cfg)).expect("random molecules encode"))
        .collect();
    (0..n)
        .map(|_| {
            let selfies = pool[rng.gen_range(0..pool.len())].clone();
            let split = if rng.gen_bool(0.2) { Split::Test } else { Split::Train };
            let (task_id, task_group, instruction, input, target) = match rng.gen_range(0..3) {
                0 => ("logp", TaskGroup::PropertyRegression, "Predict the LogP.", Some(selfies), format!("{:.4}", rng.gen_range(-3.0..5.0))),
                1 => ("text2mol", TaskGroup::Molgen, "Write the molecule.", None, selfies),
                _ => ("mol2text", TaskGroup::Captioning, "Describe the molecule.", Some(selfies), "A synthetic molecule.".to_string()),
            };
            InstructionRecord {
                task_id: task_id.to_string(),
                task_group,
                instruction: instruction.to_string(),
                input_selfies: input,
                target,
                source: "synthetic".to_string(),
                split,
            }
        })
        .collect()
}
