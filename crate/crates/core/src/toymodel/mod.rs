//! A small graph-conditioned sequence scorer with reverse-mode gradients,
//! its trainers and synthetic tasks.

mod model;
mod params;
mod synth;
mod tape;
mod train;

pub use model::{
    atom_type, bond_type, EmbeddingSet, EncodedGraph, ModelConfig, ModelError, TokenInput, ToyModel, Vocab, ATOM_TYPES,
    BOND_TYPES, MAX_VOCAB,
};
pub use params::{ParamId, Params, Tensor};
pub use synth::{
    gdr_ablation, synthetic_molecules, synthetic_pairs, synthetic_train_config, AblationOutcome, SynthConfig, SYNTH_TASK,
};
pub use tape::{NodeId, Tape};
pub use train::{
    context_tokens, evaluate_gdr, funcgroup_loss, gradient_check, mean_funcgroup_loss, pair_examples, pair_loss,
    pair_loss_with, pair_vocab, target_tokens, train_funcgroups, train_pairs, write_trace, GroupCheck, PairExample,
    PairObjective, PairOutcome, TraceRow, TrainConfig, TrainError, TrainMode,
};
