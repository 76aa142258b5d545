use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ModelError, ToyModel, Vocab};
use super::params::Params;
use super::tape::{NodeId, Tape};
use crate::dataset::InstructionRecord;
use crate::molgraph::{parse_selfies, selfies_tokens, MolError, MolGraph};
use crate::molpo::{self, molpo_terms, MolpoConfig, ObjectiveError, Reduction, TaskMarginState};
use crate::perturb::PairRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    SftOnly,
    SftPlusMolpo,
    FuncgroupPretrain,
}

impl std::str::FromStr for TrainMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sft_only" => Ok(TrainMode::SftOnly),
            "sft_plus_molpo" => Ok(TrainMode::SftPlusMolpo),
            "funcgroup_pretrain" => Ok(TrainMode::FuncgroupPretrain),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Adam step size.
    pub lr: f64,
    pub seed: u64,
    /// When false the SELFIES tokens are left out of the scorer's context;
    /// the graph is still built from them.
    pub use_selfies_tokens: bool,
    pub trace_every: usize,
    pub model: ModelConfig,
    pub molpo: MolpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 400,
            batch_size: 16,
            lr: 0.01,
            seed: 0,
            use_selfies_tokens: true,
            trace_every: 1,
            model: ModelConfig::default(),
            molpo: MolpoConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config("lr must be positive".into()));
        }
        if self.model.d_g == 0 || self.model.layers == 0 || self.model.head_hidden == 0 {
            return Err(TrainError::Config("model sizes must be positive".into()));
        }
        self.molpo.validate()?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Molecule(#[from] MolError),
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
    #[error("no training data")]
    Empty,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training diverged at step {step}: {what} is not finite")]
    Diverged { step: usize, what: &'static str },
}

/// One tokenized preference pair.
#[derive(Debug, Clone)]
pub struct PairExample {
    pub task: String,
    pub chosen: MolGraph,
    pub rejected: MolGraph,
    pub context: Vec<usize>,
    pub target: Vec<usize>,
}

/// Instruction words, optionally followed by the SELFIES tokens.
pub fn context_tokens(record: &InstructionRecord, use_selfies_tokens: bool) -> Result<Vec<String>, MolError> {
    let mut out: Vec<String> = record.instruction.split_whitespace().map(str::to_string).collect();
    if use_selfies_tokens {
        if let Some(s) = &record.input_selfies {
            out.extend(selfies_tokens(s)?);
        }
    }
    Ok(out)
}

pub fn target_tokens(record: &InstructionRecord) -> Vec<String> {
    record.target.split_whitespace().map(str::to_string).collect()
}

pub fn pair_vocab(pairs: &[PairRecord], use_selfies_tokens: bool) -> Result<Vocab, TrainError> {
    let mut all = Vec::new();
    for p in pairs {
        all.extend(context_tokens(&p.record, use_selfies_tokens)?);
        all.extend(target_tokens(&p.record));
    }
    Ok(Vocab::from_tokens(all)?)
}

pub fn pair_examples(pairs: &[PairRecord], vocab: &Vocab, use_selfies_tokens: bool) -> Result<Vec<PairExample>, TrainError> {
    pairs
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let err = |message: String| TrainError::Record { index, message };
            let selfies = p.record.input_selfies.as_deref().ok_or_else(|| err("missing input_selfies".into()))?;
            let chosen = parse_selfies(selfies).map_err(|e| err(e.to_string()))?;
            let rejected = parse_selfies(&p.rejected_selfies).map_err(|e| err(e.to_string()))?;
            if chosen.is_empty() || rejected.is_empty() {
                return Err(err("empty molecule".into()));
            }
            let context = vocab.ids(&context_tokens(&p.record, use_selfies_tokens)?).map_err(|e| err(e.to_string()))?;
            let target = vocab.ids(&target_tokens(&p.record)).map_err(|e| err(e.to_string()))?;
            if target.is_empty() {
                return Err(err("empty target".into()));
            }
            Ok(PairExample { task: p.record.task_id.clone(), chosen, rejected, context, target })
        })
        .collect()
}

/// Per-token log-probability nodes of `target` conditioned on `g`.
fn score_nodes(model: &ToyModel, tape: &mut Tape, params: &Params, g: &MolGraph, context: &[usize], target: &[usize]) -> Result<Vec<NodeId>, ModelError> {
    let e = model.encode_on(tape, params, g)?;
    let ctx = model.context_on(tape, params, &e.rows(), context);
    Ok(model.score_on(tape, params, ctx, target))
}

/// Values of one pair evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub l_sft: f64,
    pub l_molpo: f64,
    pub r_w: f64,
    pub r_l: f64,
    pub loss: f64,
}

/// Which terms of a pair loss carry gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairObjective {
    pub molpo: MolpoConfig,
    /// Include `c · L_MolPO` in the differentiated loss.
    pub with_molpo: bool,
}

/// Summed SFT NLL of the chosen graph plus, if requested, `c` times the
/// preference loss at a fixed γ. Gradients are added into `grads`.
pub fn pair_loss(
    model: &ToyModel,
    params: &Params,
    ex: &PairExample,
    objective: &PairObjective,
    gamma: f64,
    grads: Option<&mut Params>,
) -> Result<PairOutcome, TrainError> {
    pair_loss_with(model, params, ex, objective, |_| gamma, grads)
}

/// As [`pair_loss`], with γ derived from the chosen reward once it is known.
pub fn pair_loss_with<G: FnOnce(f64) -> f64>(
    model: &ToyModel,
    params: &Params,
    ex: &PairExample,
    objective: &PairObjective,
    gamma_of: G,
    grads: Option<&mut Params>,
) -> Result<PairOutcome, TrainError> {
    let cfg = &objective.molpo;
    let mut tape = Tape::new();
    let lw = score_nodes(model, &mut tape, params, &ex.chosen, &ex.context, &ex.target)?;
    let ll = score_nodes(model, &mut tape, params, &ex.rejected, &ex.context, &ex.target)?;
    let lp_w: Vec<f64> = lw.iter().map(|&n| tape.scalar(n)).collect();
    let lp_l: Vec<f64> = ll.iter().map(|&n| tape.scalar(n)).collect();
    let (l_sft, d_sft) = molpo::seq_nll(&lp_w, Reduction::Sum)?;
    let r_w = molpo::reward(&lp_w, cfg.beta)?;
    let r_l = molpo::reward(&lp_l, cfg.beta)?;
    let terms = molpo_terms(r_w, r_l, gamma_of(r_w), cfg.lambda_clip);
    let scale = cfg.beta / ex.target.len() as f64;
    let mut partials: Vec<(NodeId, Vec<f64>)> = lw.iter().zip(&d_sft).map(|(&n, &d)| (n, vec![d])).collect();
    let loss = if objective.with_molpo {
        for (p, _) in partials.iter_mut().zip(&lw) {
            p.1[0] += cfg.c * terms.d_rw * scale;
        }
        partials.extend(ll.iter().map(|&n| (n, vec![cfg.c * terms.d_rl * scale])));
        molpo::combined_loss(l_sft, terms.loss, cfg.c)
    } else {
        l_sft
    };
    if let Some(grads) = grads {
        let root = tape.linear(loss, partials);
        tape.backward(root, params, grads);
    }
    Ok(PairOutcome { l_sft, l_molpo: terms.loss, r_w, r_l, loss })
}

/// Summed multilabel BCE of the functional-group head, with gradients.
pub fn funcgroup_loss(model: &ToyModel, params: &Params, g: &MolGraph, labels: &[u8], grads: Option<&mut Params>) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let e = model.encode_on(&mut tape, params, g)?;
    let logits = model.head_on(&mut tape, params, &e);
    let (loss, d) = molpo::bce_with_logits(tape.value(logits), labels)?;
    if let Some(grads) = grads {
        let root = tape.linear(loss, vec![(logits, d)]);
        tape.backward(root, params, grads);
    }
    Ok(loss)
}

/// One trace line. `l_molpo` and `gdr` are batch means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub l_sft: f64,
    pub l_molpo: f64,
    pub gdr: f64,
}

pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(w, "step,l_sft,l_molpo,gdr")?;
    for r in rows {
        writeln!(w, "{},{:.6},{:.6},{:.4}", r.step, r.l_sft, r.l_molpo, r.gdr)?;
    }
    Ok(())
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &Params) -> Adam {
        Adam { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for id in grads.ids() {
            let g = &grads.get(id).data;
            let m = &mut self.m.get_mut(id).data;
            let v = &mut self.v.get_mut(id).data;
            let p = &mut params.get_mut(id).data;
            for i in 0..g.len() {
                m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * g[i];
                v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Trains on preference pairs. `sft_only` still scores the rejected graph so the trace can report the
/// preference loss and GDR, but only the SFT term is differentiated.
pub fn train_pairs(model: &mut ToyModel, data: &[PairExample], mode: TrainMode, cfg: &TrainConfig) -> Result<Vec<TraceRow>, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    let with_molpo = match mode {
        TrainMode::SftOnly => false,
        TrainMode::SftPlusMolpo => true,
        TrainMode::FuncgroupPretrain => return Err(TrainError::Config("funcgroup_pretrain takes molecules, not pairs".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = TaskMarginState::new();
    let objective = PairObjective { molpo: cfg.molpo, with_molpo };
    let mut opt = Adam::new(&model.params);
    let (steps, trace_every) = (cfg.steps, cfg.trace_every);
    let mut trace = Vec::new();
    let n = cfg.batch_size as f64;
    for step in 0..steps {
        let mut grads = model.params.zeros_like();
        let (mut l_sft, mut l_molpo, mut wins) = (0.0, 0.0, 0usize);
        for _ in 0..cfg.batch_size {
            let ex = &data[rng.gen_range(0..data.len())];
            let gamma_of = |r_w: f64| {
                state.observe(&ex.task, r_w, cfg.molpo.ema_decay);
                state.gamma(&ex.task, cfg.molpo.lambda_margin)
            };
            let out = pair_loss_with(model, &model.params, ex, &objective, gamma_of, Some(&mut grads))?;
            l_sft += out.l_sft;
            l_molpo += out.l_molpo;
            wins += (out.r_w > out.r_l) as usize;
        }
        if !l_sft.is_finite() {
            return Err(TrainError::Diverged { step, what: "l_sft" });
        }
        if !l_molpo.is_finite() {
            return Err(TrainError::Diverged { step, what: "l_molpo" });
        }
        grads.scale(1.0 / n);
        opt.step(&mut model.params, &grads, cfg.lr);
        if !model.params.all_finite() {
            return Err(TrainError::Diverged { step, what: "parameters" });
        }
        if trace_every > 0 && (step % trace_every == 0 || step + 1 == steps) {
            trace.push(TraceRow { step, l_sft: l_sft / n, l_molpo: l_molpo / n, gdr: wins as f64 / n });
        }
    }
    Ok(trace)
}

/// Multilabel functional-group pre-training. Returns the mean loss over
/// the whole set before training and after every `trace_every` steps.
pub fn train_funcgroups(model: &mut ToyModel, data: &[(MolGraph, Vec<u8>)], cfg: &TrainConfig) -> Result<Vec<(usize, f64)>, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    if let Some((_, l)) = data.iter().find(|(_, l)| l.len() != model.config.groups) {
        return Err(TrainError::Config(format!("label width {} but the head has {} outputs", l.len(), model.config.groups)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&model.params);
    let mut trace = vec![(0, mean_funcgroup_loss(model, data)?)];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    for step in 0..cfg.steps {
        let mut grads = model.params.zeros_like();
        let mut total = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let (g, labels) = &data[order[cursor]];
            cursor += 1;
            total += funcgroup_loss(model, &model.params, g, labels, Some(&mut grads))?;
        }
        if !total.is_finite() {
            return Err(TrainError::Diverged { step, what: "l_func" });
        }
        grads.scale(1.0 / cfg.batch_size as f64);
        adam.step(&mut model.params, &grads, cfg.lr);
        if !model.params.all_finite() {
            return Err(TrainError::Diverged { step, what: "parameters" });
        }
        if cfg.trace_every > 0 && ((step + 1) % cfg.trace_every == 0 || step + 1 == cfg.steps) {
            trace.push((step + 1, mean_funcgroup_loss(model, data)?));
        }
    }
    Ok(trace)
}

pub fn mean_funcgroup_loss(model: &ToyModel, data: &[(MolGraph, Vec<u8>)]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for (g, labels) in data {
        total += funcgroup_loss(model, &model.params, g, labels, None)?;
    }
    Ok(total / data.len() as f64)
}

/// Fraction of pairs where the chosen graph gives the target a higher mean
/// log-probability than the rejected graph.
pub fn evaluate_gdr(model: &ToyModel, data: &[PairExample]) -> Result<f64, TrainError> {
    let mut scored = Vec::with_capacity(data.len());
    for ex in data {
        let input = super::model::TokenInput { context: ex.context.clone(), target: ex.target.clone() };
        let w = molpo::reward(&model.score_sequence(&ex.chosen, &input)?, 1.0)?;
        let l = molpo::reward(&model.score_sequence(&ex.rejected, &input)?, 1.0)?;
        scored.push((w, l));
    }
    Ok(molpo::gdr(&scored)?)
}

/// Worst relative error between analytic and central-difference gradients
/// within one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub probes: usize,
    pub max_rel_error: f64,
}

/// Compares `loss`'s analytic gradient with central differences on up to
/// `max_probes` entries per parameter group. `loss` evaluates the scalar
/// loss at the given parameters and adds its gradient when asked.
pub fn gradient_check<F>(params: &Params, max_probes: usize, seed: u64, mut loss: F) -> Result<Vec<GroupCheck>, TrainError>
where
    F: FnMut(&Params, Option<&mut Params>) -> Result<f64, TrainError>,
{
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let mut grads = params.zeros_like();
    loss(params, Some(&mut grads))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut out = Vec::new();
    for id in params.ids() {
        let t = params.get(id);
        let n = t.data.len();
        let picks: Vec<usize> = if n <= max_probes { (0..n).collect() } else { rand::seq::index::sample(&mut rng, n, max_probes).into_vec() };
        let mut worst: f64 = 0.0;
        for &i in &picks {
            let x = t.data[i];
            probe.get_mut(id).data[i] = x + H;
            let up = loss(&probe, None)?;
            probe.get_mut(id).data[i] = x - H;
            let down = loss(&probe, None)?;
            probe.get_mut(id).data[i] = x;
            let numeric = (up - down) / (2.0 * H);
            let analytic = grads.get(id).data[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
        out.push(GroupCheck { name: t.name.clone(), probes: picks.len(), max_rel_error: worst });
    }
    Ok(out)
}
