use std::collections::HashMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{read_str, read_u32, write_str, ParamId, Params};
use super::tape::{NodeId, Tape};
use crate::molgraph::{BondOrder, Element, MolGraph};

pub const MAX_VOCAB: usize = 512;
const MAGIC: &[u8; 8] = b"MKTOY\x00\x01\x00";

const ELEMENT_SLOTS: [Element; 10] = [
    Element::C,
    Element::N,
    Element::O,
    Element::S,
    Element::F,
    Element::CL,
    Element::BR,
    Element::I,
    Element::P,
    Element::B,
];
/// Element slots plus "other", times aromatic flag, times charge sign.
pub const ATOM_TYPES: usize = (ELEMENT_SLOTS.len() + 1) * 2 * 3;
pub const BOND_TYPES: usize = 4;

pub fn atom_type(g: &MolGraph, i: usize) -> usize {
    let a = g.atom(i);
    let e = ELEMENT_SLOTS.iter().position(|&x| x == a.element).unwrap_or(ELEMENT_SLOTS.len());
    let charge = match a.formal_charge.signum() {
        -1 => 0,
        0 => 1,
        _ => 2,
    };
    (e * 2 + a.aromatic as usize) * 3 + charge
}

pub fn bond_type(order: BondOrder) -> usize {
    match order {
        BondOrder::Single => 0,
        BondOrder::Double => 1,
        BondOrder::Triple => 2,
        BondOrder::Aromatic => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_g: usize,
    pub layers: usize,
    pub head_hidden: usize,
    pub groups: usize,
    pub init_std: f64,
    /// Scale of the atom and bond embedding tables at initialization.
    pub embed_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d_g: 32, layers: 2, head_hidden: 32, groups: 72, init_std: 0.2, embed_std: 0.5 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("vocabulary has {0} tokens, more than {MAX_VOCAB}")]
    VocabTooLarge(usize),
    #[error("empty target sequence")]
    EmptyTarget,
    #[error("empty molecule")]
    EmptyGraph,
    #[error("malformed parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token vocabulary shared by the input bag and the output softmax.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Deduplicated, sorted vocabulary.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Vocab, ModelError> {
        let mut all: Vec<String> = tokens.into_iter().collect();
        all.sort();
        all.dedup();
        if all.len() > MAX_VOCAB {
            return Err(ModelError::VocabTooLarge(all.len()));
        }
        let index = all.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocab { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Result<usize, ModelError> {
        self.index.get(token).copied().ok_or_else(|| ModelError::UnknownToken(token.to_string()))
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>, ModelError> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

struct Ids {
    atom_a: ParamId,
    bond_a: ParamId,
    gine_w: Vec<ParamId>,
    gine_b: Vec<ParamId>,
    gine_eps: Vec<ParamId>,
    atom_b: ParamId,
    bond_b: ParamId,
    mix_w: ParamId,
    mix_b: ParamId,
    ctx_w: ParamId,
    tok_in: ParamId,
    tok_prev: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    head_w1: ParamId,
    head_b1: ParamId,
    head_w2: ParamId,
    head_b2: ParamId,
}

impl Ids {
    fn lookup(p: &Params, layers: usize) -> Result<Ids, ModelError> {
        let id = |n: &str| p.id(n).ok_or_else(|| ModelError::Format(format!("missing parameter {n}")));
        Ok(Ids {
            atom_a: id("atom_a")?,
            bond_a: id("bond_a")?,
            gine_w: (0..layers).map(|l| id(&format!("gine{l}_w"))).collect::<Result<_, _>>()?,
            gine_b: (0..layers).map(|l| id(&format!("gine{l}_b"))).collect::<Result<_, _>>()?,
            gine_eps: (0..layers).map(|l| id(&format!("gine{l}_eps"))).collect::<Result<_, _>>()?,
            atom_b: id("atom_b")?,
            bond_b: id("bond_b")?,
            mix_w: id("mix_w")?,
            mix_b: id("mix_b")?,
            ctx_w: id("ctx_w")?,
            tok_in: id("tok_in")?,
            tok_prev: id("tok_prev")?,
            out_w: id("out_w")?,
            out_b: id("out_b")?,
            head_w1: id("head_w1")?,
            head_b1: id("head_b1")?,
            head_w2: id("head_w2")?,
            head_b2: id("head_b2")?,
        })
    }
}

/// Graph encoder (message passing plus token mixer), pooled-context
/// sequence scorer and functional-group head.
pub struct ToyModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Params,
    ids: Ids,
}

/// Tape handles of one encoded graph.
#[derive(Debug, Clone)]
pub struct EncodedGraph {
    pub graph_a: NodeId,
    pub nodes_a: Vec<NodeId>,
    pub graph_b: NodeId,
    pub nodes_b: Vec<NodeId>,
    pub edges_b: Vec<NodeId>,
}

impl EncodedGraph {
    /// Rows of `h` in the fixed order `[g_A; v_A; g_B; v_B; e_B]`.
    pub fn rows(&self) -> Vec<NodeId> {
        let mut out = vec![self.graph_a];
        out.extend(&self.nodes_a);
        out.push(self.graph_b);
        out.extend(&self.nodes_b);
        out.extend(&self.edges_b);
        out
    }
}

/// Plain values of an encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub d_g: usize,
    pub graph_a: Vec<f64>,
    pub nodes_a: Vec<Vec<f64>>,
    pub graph_b: Vec<f64>,
    pub nodes_b: Vec<Vec<f64>>,
    pub edges_b: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    /// The concatenated `(2|V| + |E| + 2) × d_g` matrix, row by row.
    pub fn h(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.graph_a.clone()];
        out.extend(self.nodes_a.iter().cloned());
        out.push(self.graph_b.clone());
        out.extend(self.nodes_b.iter().cloned());
        out.extend(self.edges_b.iter().cloned());
        out
    }
}

/// Token inputs of one scoring call.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenInput {
    pub context: Vec<usize>,
    pub target: Vec<usize>,
}

impl ToyModel {
    fn layout(config: &ModelConfig, vocab_len: usize) -> Params {
        let d = config.d_g;
        let mut p = Params::new();
        p.add("atom_a", ATOM_TYPES, d);
        p.add("bond_a", BOND_TYPES, d);
        for l in 0..config.layers {
            p.add(&format!("gine{l}_w"), d, d);
            p.add(&format!("gine{l}_b"), d, 1);
            p.add(&format!("gine{l}_eps"), 1, 1);
        }
        p.add("atom_b", ATOM_TYPES, d);
        p.add("bond_b", BOND_TYPES, d);
        p.add("mix_w", d, d);
        p.add("mix_b", d, 1);
        p.add("ctx_w", d, d);
        p.add("tok_in", vocab_len, d);
        p.add("tok_prev", vocab_len + 1, d);
        p.add("out_w", vocab_len, d);
        p.add("out_b", vocab_len, 1);
        p.add("head_w1", config.head_hidden, 2 * d);
        p.add("head_b1", config.head_hidden, 1);
        p.add("head_w2", config.groups, config.head_hidden);
        p.add("head_b2", config.groups, 1);
        p
    }

    /// All parameters zero: every output distribution is uniform.
    pub fn uniform(config: ModelConfig, vocab: Vocab) -> ToyModel {
        let params = ToyModel::layout(&config, vocab.len());
        let ids = Ids::lookup(&params, config.layers).expect("fresh layout");
        ToyModel { config, vocab, params, ids }
    }

    /// Gaussian initialization; biases and GINE ε start at zero.
    pub fn init(config: ModelConfig, vocab: Vocab, seed: u64) -> ToyModel {
        let mut m = ToyModel::uniform(config, vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<ParamId> = m.params.ids().collect();
        for id in ids {
            let t = m.params.get(id);
            let name = t.name.clone();
            if name.ends_with("_b") || name.ends_with("_eps") || name.ends_with("_b1") || name.ends_with("_b2") {
                continue;
            }
            let std = if name.starts_with("atom_") || name.starts_with("bond_") || name.starts_with("tok_") {
                config.embed_std
            } else {
                config.init_std
            };
            m.params.fill_normal(id, std, &mut rng);
        }
        m
    }

    pub fn param_id(&self, name: &str) -> Option<ParamId> {
        self.params.id(name)
    }

    /// Records the encoder forward pass of `g` on `tape`.
    pub fn encode_on(&self, tape: &mut Tape, params: &Params, g: &MolGraph) -> Result<EncodedGraph, ModelError> {
        if g.is_empty() {
            return Err(ModelError::EmptyGraph);
        }
        let ids = &self.ids;
        let n = g.atom_count();
        let types: Vec<usize> = (0..n).map(|i| atom_type(g, i)).collect();
        let btypes: Vec<usize> = g.bonds().iter().map(|b| bond_type(b.order)).collect();

        // Message passing branch.
        let mut h: Vec<NodeId> = types.iter().map(|&t| tape.row(params, ids.atom_a, t)).collect();
        let edge_a: Vec<NodeId> = btypes.iter().map(|&t| tape.row(params, ids.bond_a, t)).collect();
        for l in 0..self.config.layers {
            let mut next = Vec::with_capacity(n);
            for v in 0..n {
                let mut msg = tape.one_plus_scale(params, ids.gine_eps[l], h[v]);
                for &(u, bi) in g.neighbors(v) {
                    let pre = tape.add(h[u], edge_a[bi]);
                    let m = tape.tanh(pre);
                    msg = tape.add(msg, m);
                }
                let lin = tape.matvec(params, ids.gine_w[l], msg);
                let lin = tape.add_bias(params, ids.gine_b[l], lin);
                next.push(tape.tanh(lin));
            }
            h = next;
        }
        let graph_a = tape.mean(&h);

        // Token-mixer branch: one round of neighbourhood averaging.
        let tv: Vec<NodeId> = types.iter().map(|&t| tape.row(params, ids.atom_b, t)).collect();
        let te: Vec<NodeId> = btypes.iter().map(|&t| tape.row(params, ids.bond_b, t)).collect();
        let mixed = |tape: &mut Tape, own: NodeId, others: &[NodeId]| {
            let pre = if others.is_empty() {
                own
            } else {
                let avg = tape.mean(others);
                tape.add(own, avg)
            };
            let lin = tape.matvec(params, ids.mix_w, pre);
            let lin = tape.add_bias(params, ids.mix_b, lin);
            tape.tanh(lin)
        };
        let nodes_b: Vec<NodeId> = (0..n)
            .map(|v| {
                let incident: Vec<NodeId> = g.neighbors(v).iter().map(|&(_, bi)| te[bi]).collect();
                mixed(tape, tv[v], &incident)
            })
            .collect();
        let edges_b: Vec<NodeId> =
            g.bonds().iter().enumerate().map(|(bi, b)| mixed(tape, te[bi], &[tv[b.a], tv[b.b]])).collect();
        let mut all = nodes_b.clone();
        all.extend(&edges_b);
        let graph_b = tape.mean(&all);
        Ok(EncodedGraph { graph_a, nodes_a: h, graph_b, nodes_b, edges_b })
    }

    pub fn encode(&self, g: &MolGraph) -> Result<EmbeddingSet, ModelError> {
        let mut tape = Tape::new();
        let e = self.encode_on(&mut tape, &self.params, g)?;
        let v = |n: &NodeId| tape.value(*n).to_vec();
        Ok(EmbeddingSet {
            d_g: self.config.d_g,
            graph_a: v(&e.graph_a),
            nodes_a: e.nodes_a.iter().map(v).collect(),
            graph_b: v(&e.graph_b),
            nodes_b: e.nodes_b.iter().map(v).collect(),
            edges_b: e.edges_b.iter().map(v).collect(),
        })
    }

    /// Pooled context: `ctx_w · mean(h)` plus the mean embedding of the
    /// context tokens. Either part may be absent.
    pub fn context_on(&self, tape: &mut Tape, params: &Params, h_rows: &[NodeId], context: &[usize]) -> NodeId {
        let graph = (!h_rows.is_empty()).then(|| {
            let pooled = tape.mean(h_rows);
            tape.matvec(params, self.ids.ctx_w, pooled)
        });
        let text = (!context.is_empty()).then(|| {
            let toks: Vec<NodeId> = context.iter().map(|&t| tape.row(params, self.ids.tok_in, t)).collect();
            tape.mean(&toks)
        });
        match (graph, text) {
            (Some(g), Some(t)) => tape.add(g, t),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => tape.constant(vec![0.0; self.config.d_g]),
        }
    }

    /// Per-token log-probabilities of `target` given the context vector.
    pub fn score_on(&self, tape: &mut Tape, params: &Params, ctx: NodeId, target: &[usize]) -> Vec<NodeId> {
        let bos = self.vocab.len();
        let mut out = Vec::with_capacity(target.len());
        let mut prev = bos;
        for &y in target {
            let p = tape.row(params, self.ids.tok_prev, prev);
            let s = tape.add(ctx, p);
            let s = tape.tanh(s);
            let logits = tape.matvec(params, self.ids.out_w, s);
            let logits = tape.add_bias(params, self.ids.out_b, logits);
            out.push(tape.log_softmax_pick(logits, y));
            prev = y;
        }
        out
    }

    /// Convenience wrapper: encodes `g` and scores `input.target`.
    pub fn score_sequence(&self, g: &MolGraph, input: &TokenInput) -> Result<Vec<f64>, ModelError> {
        if input.target.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        let mut tape = Tape::new();
        let e = self.encode_on(&mut tape, &self.params, g)?;
        let ctx = self.context_on(&mut tape, &self.params, &e.rows(), &input.context);
        let lps = self.score_on(&mut tape, &self.params, ctx, &input.target);
        Ok(lps.iter().map(|&n| tape.scalar(n)).collect())
    }

    /// Scores `target` from an explicit `h` matrix (rows of width d_g),
    /// bypassing the encoder.
    pub fn score_with_h(&self, h: &[Vec<f64>], input: &TokenInput) -> Result<Vec<f64>, ModelError> {
        if input.target.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        let mut tape = Tape::new();
        let rows: Vec<NodeId> = h.iter().map(|r| tape.constant(r.clone())).collect();
        let ctx = self.context_on(&mut tape, &self.params, &rows, &input.context);
        let lps = self.score_on(&mut tape, &self.params, ctx, &input.target);
        Ok(lps.iter().map(|&n| tape.scalar(n)).collect())
    }

    /// Functional-group logits from the two graph embeddings.
    pub fn head_on(&self, tape: &mut Tape, params: &Params, e: &EncodedGraph) -> NodeId {
        let z = tape.concat(&[e.graph_a, e.graph_b]);
        let a = tape.matvec(params, self.ids.head_w1, z);
        let a = tape.add_bias(params, self.ids.head_b1, a);
        let a = tape.tanh(a);
        let o = tape.matvec(params, self.ids.head_w2, a);
        tape.add_bias(params, self.ids.head_b2, o)
    }

    pub fn group_probabilities(&self, g: &MolGraph) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let e = self.encode_on(&mut tape, &self.params, g)?;
        let logits = self.head_on(&mut tape, &self.params, &e);
        Ok(tape.value(logits).iter().map(|&z| crate::molpo::sigmoid(z)).collect())
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        w.write_all(MAGIC)?;
        let cfg = serde_json::to_string(&self.config).expect("config serializes");
        write_str(&mut w, &cfg)?;
        w.write_all(&(self.vocab.len() as u32).to_le_bytes())?;
        for t in self.vocab.tokens() {
            write_str(&mut w, t)?;
        }
        self.params.write_to(&mut w)?;
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<ToyModel, ModelError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ModelError::Format("bad magic".into()));
        }
        let config: ModelConfig =
            serde_json::from_str(&read_str(&mut r)?).map_err(|e| ModelError::Format(e.to_string()))?;
        let n = read_u32(&mut r)? as usize;
        let tokens = (0..n).map(|_| read_str(&mut r)).collect::<Result<Vec<_>, _>>()?;
        let vocab = Vocab::from_tokens(tokens)?;
        let params = Params::read_from(&mut r)?;
        let expected = ToyModel::layout(&config, vocab.len());
        let same_shape = expected.tensors().len() == params.tensors().len()
            && expected
                .tensors()
                .iter()
                .zip(params.tensors())
                .all(|(a, b)| a.name == b.name && a.rows == b.rows && a.cols == b.cols);
        if !same_shape {
            return Err(ModelError::Format("parameter shapes do not match the config".into()));
        }
        let ids = Ids::lookup(&params, config.layers)?;
        Ok(ToyModel { config, vocab, params, ids })
    }
}
