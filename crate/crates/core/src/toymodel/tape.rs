//! A small reverse-mode tape over dense vectors. Parameters live outside
//! the tape; their gradients are accumulated into a [`Params`]-shaped
//! buffer during [`Tape::backward`].

use super::params::{ParamId, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Row { p: ParamId, row: usize },
    MatVec { p: ParamId, x: NodeId },
    AddBias { p: ParamId, x: NodeId },
    /// `(1 + p[0]) · x`
    OnePlusScale { p: ParamId, x: NodeId },
    Add(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Mean(Vec<NodeId>),
    Concat(Vec<NodeId>),
    /// `log_softmax(x)[index]`, with the softmax cached.
    LogSoftmaxPick { x: NodeId, index: usize, probs: Vec<f64> },
    /// Scalar output with known partial derivatives.
    Linear(Vec<(NodeId, Vec<f64>)>),
    Const,
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, n: NodeId) -> &[f64] {
        &self.nodes[n.0].value
    }

    pub fn scalar(&self, n: NodeId) -> f64 {
        self.nodes[n.0].value[0]
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Const)
    }

    pub fn row(&mut self, params: &Params, p: ParamId, row: usize) -> NodeId {
        let value = params.row(p, row).to_vec();
        self.push(value, Op::Row { p, row })
    }

    pub fn matvec(&mut self, params: &Params, p: ParamId, x: NodeId) -> NodeId {
        let t = params.get(p);
        let xv = &self.nodes[x.0].value;
        debug_assert_eq!(t.cols, xv.len());
        let value = (0..t.rows).map(|r| t.data[r * t.cols..(r + 1) * t.cols].iter().zip(xv).map(|(a, b)| a * b).sum()).collect();
        self.push(value, Op::MatVec { p, x })
    }

    pub fn add_bias(&mut self, params: &Params, p: ParamId, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.iter().zip(&params.get(p).data).map(|(a, b)| a + b).collect();
        self.push(value, Op::AddBias { p, x })
    }

    pub fn one_plus_scale(&mut self, params: &Params, p: ParamId, x: NodeId) -> NodeId {
        let k = 1.0 + params.get(p).data[0];
        let value = self.nodes[x.0].value.iter().map(|v| k * v).collect();
        self.push(value, Op::OnePlusScale { p, x })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| x + y).collect();
        self.push(value, Op::Add(a, b))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let value = self.nodes[a.0].value.iter().map(|v| k * v).collect();
        self.push(value, Op::Scale(a, k))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh(a))
    }

    /// Element-wise mean of equally sized nodes.
    pub fn mean(&mut self, xs: &[NodeId]) -> NodeId {
        assert!(!xs.is_empty(), "mean of no nodes");
        let mut value = vec![0.0; self.nodes[xs[0].0].value.len()];
        for x in xs {
            for (acc, v) in value.iter_mut().zip(&self.nodes[x.0].value) {
                *acc += v;
            }
        }
        let k = 1.0 / xs.len() as f64;
        value.iter_mut().for_each(|v| *v *= k);
        self.push(value, Op::Mean(xs.to_vec()))
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> NodeId {
        let value = xs.iter().flat_map(|x| self.nodes[x.0].value.iter().copied()).collect();
        self.push(value, Op::Concat(xs.to_vec()))
    }

    pub fn log_softmax_pick(&mut self, x: NodeId, index: usize) -> NodeId {
        let v = &self.nodes[x.0].value;
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = v.iter().map(|a| (a - max).exp()).sum();
        let log_z = max + z.ln();
        let probs = v.iter().map(|a| (a - log_z).exp()).collect();
        let value = vec![v[index] - log_z];
        self.push(value, Op::LogSoftmaxPick { x, index, probs })
    }

    /// A scalar node whose value is computed elsewhere, with its partial
    /// derivatives with respect to each input node.
    pub fn linear(&mut self, value: f64, partials: Vec<(NodeId, Vec<f64>)>) -> NodeId {
        for (x, d) in &partials {
            debug_assert_eq!(self.nodes[x.0].value.len(), d.len());
        }
        self.push(vec![value], Op::Linear(partials))
    }

    /// Back-propagates from a scalar `root`, adding parameter gradients into
    /// `grads` (which must have the shape of `params`).
    pub fn backward(&self, root: NodeId, params: &Params, grads: &mut Params) {
        let mut adj: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        adj[root.0][0] = 1.0;
        for i in (0..=root.0).rev() {
            let g = std::mem::take(&mut adj[i]);
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Const => {}
                Op::Row { p, row } => {
                    for (acc, v) in grads.row_mut(*p, *row).iter_mut().zip(&g) {
                        *acc += v;
                    }
                }
                Op::MatVec { p, x } => {
                    let t = params.get(*p);
                    let xv = &self.nodes[x.0].value;
                    let gt = grads.get_mut(*p);
                    for r in 0..t.rows {
                        let gr = g[r];
                        if gr == 0.0 {
                            continue;
                        }
                        let row = &mut gt.data[r * t.cols..(r + 1) * t.cols];
                        for (acc, xv) in row.iter_mut().zip(xv) {
                            *acc += gr * xv;
                        }
                        let w = &t.data[r * t.cols..(r + 1) * t.cols];
                        for (acc, w) in adj[x.0].iter_mut().zip(w) {
                            *acc += gr * w;
                        }
                    }
                }
                Op::AddBias { p, x } => {
                    for (acc, v) in grads.get_mut(*p).data.iter_mut().zip(&g) {
                        *acc += v;
                    }
                    for (acc, v) in adj[x.0].iter_mut().zip(&g) {
                        *acc += v;
                    }
                }
                Op::OnePlusScale { p, x } => {
                    let k = 1.0 + params.get(*p).data[0];
                    let xv = &self.nodes[x.0].value;
                    grads.get_mut(*p).data[0] += g.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
                    for (acc, v) in adj[x.0].iter_mut().zip(&g) {
                        *acc += k * v;
                    }
                }
                Op::Add(a, b) => {
                    for (acc, v) in adj[a.0].iter_mut().zip(&g) {
                        *acc += v;
                    }
                    for (acc, v) in adj[b.0].iter_mut().zip(&g) {
                        *acc += v;
                    }
                }
                Op::Scale(a, k) => {
                    for (acc, v) in adj[a.0].iter_mut().zip(&g) {
                        *acc += k * v;
                    }
                }
                Op::Tanh(a) => {
                    for ((acc, v), y) in adj[a.0].iter_mut().zip(&g).zip(&node.value) {
                        *acc += v * (1.0 - y * y);
                    }
                }
                Op::Mean(xs) => {
                    let k = 1.0 / xs.len() as f64;
                    for x in xs {
                        for (acc, v) in adj[x.0].iter_mut().zip(&g) {
                            *acc += k * v;
                        }
                    }
                }
                Op::Concat(xs) => {
                    let mut offset = 0;
                    for x in xs {
                        let n = self.nodes[x.0].value.len();
                        for (acc, v) in adj[x.0].iter_mut().zip(&g[offset..offset + n]) {
                            *acc += v;
                        }
                        offset += n;
                    }
                }
                Op::LogSoftmaxPick { x, index, probs } => {
                    let gv = g[0];
                    for (k, (acc, p)) in adj[x.0].iter_mut().zip(probs).enumerate() {
                        *acc += gv * ((k == *index) as u8 as f64 - p);
                    }
                }
                Op::Linear(partials) => {
                    for (x, d) in partials {
                        for (acc, d) in adj[x.0].iter_mut().zip(d) {
                            *acc += g[0] * d;
                        }
                    }
                }
            }
        }
    }
}
