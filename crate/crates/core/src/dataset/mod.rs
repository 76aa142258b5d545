//! Instruction-corpus construction: record schema, deduplication, scaffold
//! splits, out-of-distribution filters and instruction templates.

mod ood;
mod record;
mod split;
mod synth;
mod template;

pub use ood::{
    input_scaffolds, merge_solubility, ood_reaction_filter, ood_reaction_sets, ood_solubility_filter, reaction_key,
    sample_std, LabeledSolubility, SolubilityRow, OOD_LOGS_TASK,
};
pub use record::{read_records, write_records, InstructionRecord, RecordError, Split, TaskGroup};
pub use split::{dedup, scaffold_key, scaffold_split, scaffold_split_per_task, DedupReport, SplitOutcome};
pub use synth::synthetic_corpus;
pub use template::{render_instruction, TemplateError, TemplateSet};
