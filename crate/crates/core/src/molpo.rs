//! Training objectives over per-token log-probabilities: sequence NLL,
//! multilabel BCE, length-normalized rewards, the clipped preference loss
//! with task-adaptive margins, and the graph discrimination ratio.
//!
//! Every loss comes with its analytic gradient so that any scorer can
//! back-propagate through it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("empty token sequence")]
    EmptySequence,
    #[error("log-probability {value} at position {position} is positive or not finite")]
    BadLogProb { position: usize, value: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("no pairs to score")]
    NoPairs,
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Sum,
    Mean,
}

fn check_lp(lp: &[f64]) -> Result<(), ObjectiveError> {
    if lp.is_empty() {
        return Err(ObjectiveError::EmptySequence);
    }
    for (position, &value) in lp.iter().enumerate() {
        if !(value <= 0.0) {
            return Err(ObjectiveError::BadLogProb { position, value });
        }
    }
    Ok(())
}

/// Negative log-likelihood of a target sequence and its gradient with
/// respect to each log-probability.
pub fn seq_nll(lp: &[f64], reduction: Reduction) -> Result<(f64, Vec<f64>), ObjectiveError> {
    check_lp(lp)?;
    let sum: f64 = -lp.iter().sum::<f64>();
    Ok(match reduction {
        Reduction::Sum => (sum, vec![-1.0; lp.len()]),
        Reduction::Mean => (sum / lp.len() as f64, vec![-1.0 / lp.len() as f64; lp.len()]),
    })
}

/// Summed binary cross-entropy with probabilities clamped to
/// `[1e-7, 1 − 1e-7]`, and its gradient with respect to the unclamped
/// probabilities (zero where the clamp is active).
pub fn bce_multilabel(probs: &[f64], labels: &[u8]) -> Result<(f64, Vec<f64>), ObjectiveError> {
    if probs.len() != labels.len() {
        return Err(ObjectiveError::Dimension(probs.len(), labels.len()));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        let q = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let y = (y != 0) as u8 as f64;
        loss -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
        let inside = p > PROB_CLAMP && p < 1.0 - PROB_CLAMP;
        grad.push(if inside { -y / q + (1.0 - y) / (1.0 - q) } else { 0.0 });
    }
    Ok((loss, grad))
}

/// BCE evaluated on logits: the loss of `sigmoid(logits)` and its gradient
/// with respect to the logits.
pub fn bce_with_logits(logits: &[f64], labels: &[u8]) -> Result<(f64, Vec<f64>), ObjectiveError> {
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let (loss, dp) = bce_multilabel(&probs, labels)?;
    let grad = dp.iter().zip(&probs).map(|(g, p)| g * p * (1.0 - p)).collect();
    Ok((loss, grad))
}

/// β times the mean token log-probability.
pub fn reward(lp: &[f64], beta: f64) -> Result<f64, ObjectiveError> {
    check_lp(lp)?;
    Ok(beta * lp.iter().sum::<f64>() / lp.len() as f64)
}

/// d reward / d lp_t.
pub fn reward_grad(len: usize, beta: f64) -> Vec<f64> {
    vec![beta / len as f64; len]
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−ln σ(z)` without overflow.
pub fn neg_log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MolpoConfig {
    pub beta: f64,
    pub lambda_margin: f64,
    pub lambda_clip: f64,
    pub c: f64,
    pub ema_decay: f64,
}

impl Default for MolpoConfig {
    fn default() -> Self {
        MolpoConfig { beta: 1.0, lambda_margin: 0.25, lambda_clip: 1.0, c: 0.25, ema_decay: 0.99 }
    }
}

impl MolpoConfig {
    /// Defaults with the alternative margin weight of 0.5.
    pub fn margin_half() -> MolpoConfig {
        MolpoConfig { lambda_margin: 0.5, ..MolpoConfig::default() }
    }

    pub fn preset(name: &str) -> Option<MolpoConfig> {
        match name {
            "default" | "table" => Some(MolpoConfig::default()),
            "margin_half" | "text" => Some(MolpoConfig::margin_half()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let bad = |m: &str| Err(ObjectiveError::Config(m.to_string()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if !(self.lambda_margin >= 0.0 && self.lambda_margin.is_finite()) {
            return bad("lambda_margin must be non-negative");
        }
        if !(self.lambda_clip > 0.0 && self.lambda_clip.is_finite()) {
            return bad("lambda_clip must be positive");
        }
        if !self.c.is_finite() {
            return bad("c must be finite");
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad("ema_decay must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Per-task exponential moving average of the chosen reward.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMarginState {
    ema: BTreeMap<String, f64>,
}

impl TaskMarginState {
    pub fn new() -> TaskMarginState {
        TaskMarginState::default()
    }

    pub fn ema(&self, task: &str) -> f64 {
        self.ema.get(task).copied().unwrap_or(0.0)
    }

    pub fn set_ema(&mut self, task: &str, value: f64) {
        self.ema.insert(task.to_string(), value);
    }

    /// `ema ← d·ema + (1 − d)·r_w`; returns the new value.
    pub fn observe(&mut self, task: &str, r_w: f64, decay: f64) -> f64 {
        let e = self.ema.entry(task.to_string()).or_insert(0.0);
        *e = decay * *e + (1.0 - decay) * r_w;
        *e
    }

    pub fn gamma(&self, task: &str, lambda_margin: f64) -> f64 {
        lambda_margin * self.ema(task).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MolpoTerms {
    pub loss: f64,
    pub d_rw: f64,
    pub d_rl: f64,
    pub margin: f64,
    pub gamma: f64,
    pub clipped: bool,
}

/// `−ln σ(min(r_w − r_l, λ_clip·|r_w|) − γ)` for a fixed γ, with its
/// gradient. At the kink the unclipped branch is taken.
pub fn molpo_terms(r_w: f64, r_l: f64, gamma: f64, lambda_clip: f64) -> MolpoTerms {
    let diff = r_w - r_l;
    let cap = lambda_clip * r_w.abs();
    let clipped = diff > cap;
    let margin = if clipped { cap } else { diff };
    let z = margin - gamma;
    let loss = neg_log_sigmoid(z);
    let dz = sigmoid(z) - 1.0;
    let (d_rw, d_rl) = if clipped { (dz * lambda_clip * r_w.signum(), 0.0) } else { (dz, -dz) };
    MolpoTerms { loss, d_rw, d_rl, margin, gamma, clipped }
}

/// Updates the task's EMA with `r_w`, derives γ from the updated value and
/// evaluates the loss. γ is a running statistic and carries no gradient.
pub fn molpo_loss(r_w: f64, r_l: f64, state: &mut TaskMarginState, task: &str, cfg: &MolpoConfig) -> MolpoTerms {
    state.observe(task, r_w, cfg.ema_decay);
    let gamma = state.gamma(task, cfg.lambda_margin);
    molpo_terms(r_w, r_l, gamma, cfg.lambda_clip)
}

pub fn combined_loss(l_sft: f64, l_molpo: f64, c: f64) -> f64 {
    l_sft + c * l_molpo
}

/// Fraction of pairs whose chosen reward strictly exceeds the rejected one.
pub fn gdr(pairs: &[(f64, f64)]) -> Result<f64, ObjectiveError> {
    if pairs.is_empty() {
        return Err(ObjectiveError::NoPairs);
    }
    Ok(pairs.iter().filter(|(w, l)| w > l).count() as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn nll_examples() {
        assert_eq!(seq_nll(&[0.0, 0.0], Reduction::Sum).unwrap().0, 0.0);
        assert_eq!(seq_nll(&[0.0, 0.0], Reduction::Mean).unwrap().0, 0.0);
        assert_eq!(seq_nll(&[-0.5, -1.5], Reduction::Sum).unwrap().0, 2.0);
        assert_eq!(seq_nll(&[-0.5, -1.5], Reduction::Mean).unwrap().0, 1.0);
        assert_eq!(seq_nll(&[], Reduction::Sum), Err(ObjectiveError::EmptySequence));
        assert!(matches!(seq_nll(&[0.1], Reduction::Sum), Err(ObjectiveError::BadLogProb { .. })));
    }

    #[test]
    fn bce_examples() {
        assert!(bce_multilabel(&[1.0, 0.0, 1.0], &[1, 0, 1]).unwrap().0 < 3.0 * 1e-6);
        assert!((bce_multilabel(&[0.5], &[1]).unwrap().0 - LN2).abs() < 1e-12);
        assert!((bce_multilabel(&[0.5, 0.5], &[1, 0]).unwrap().0 - 2.0 * LN2).abs() < 1e-12);
        assert_eq!(bce_multilabel(&[0.5], &[1, 0]), Err(ObjectiveError::Dimension(1, 2)));
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(&[-1.0], 1.0).unwrap(), -1.0);
        assert_eq!(reward(&[-0.25, -0.75], 1.0).unwrap(), -0.5);
        assert_eq!(reward(&[-0.25, -0.75], 2.0).unwrap(), -1.0);
    }

    #[test]
    fn molpo_examples() {
        let cfg = MolpoConfig { lambda_margin: 0.0, ..MolpoConfig::default() };
        let t = molpo_loss(-1.0, -1.0, &mut TaskMarginState::new(), "t", &cfg);
        assert!((t.loss - LN2).abs() < 1e-12);

        let mut state = TaskMarginState::new();
        state.set_ema("t", -0.5);
        let cfg = MolpoConfig { lambda_margin: 0.25, lambda_clip: 1.0, ..MolpoConfig::default() };
        let t = molpo_loss(-0.5, -1.5, &mut state, "t", &cfg);
        assert_eq!((t.margin, t.gamma, t.clipped), (0.5, 0.125, true));
        assert!((t.loss - (1.0 + (-0.375f64).exp()).ln()).abs() < 1e-12);
        assert!((t.loss - 0.5231233).abs() < 1e-6);
    }

    #[test]
    fn clip_bounds_the_gain() {
        let bound = neg_log_sigmoid(1.0 * 0.5 - 0.0);
        for r_l in [-2.0, -10.0, -1e6] {
            let t = molpo_terms(-0.5, r_l, 0.0, 1.0);
            assert!((t.loss - bound).abs() < 1e-12);
            assert_eq!(t.d_rl, 0.0);
        }
    }

    #[test]
    fn combined_and_gdr() {
        assert!((combined_loss(1.0, 0.6931, 0.25) - 1.173275).abs() < 1e-12);
        assert_eq!(combined_loss(1.3, 0.7, 0.0), 1.3);
        assert_eq!(combined_loss(1.3, 0.0, 0.25), 1.3);
        assert!((gdr(&[(-0.5, -1.5), (-1.0, -0.9), (-2.0, -2.0)]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(gdr(&[(0.0, -1.0), (1.0, 0.0)]).unwrap(), 1.0);
        assert_eq!(gdr(&[(1.0, 1.0), (2.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(gdr(&[]), Err(ObjectiveError::NoPairs));
    }

    #[test]
    fn config_json() {
        let cfg: MolpoConfig = serde_json::from_str(r#"{"beta":2.0,"lambda_margin":0.5}"#).unwrap();
        assert_eq!(cfg, MolpoConfig { beta: 2.0, lambda_margin: 0.5, ..MolpoConfig::default() });
        assert!(serde_json::from_str::<MolpoConfig>(r#"{"gamma":1}"#).is_err());
        assert!(MolpoConfig { ema_decay: 1.0, ..MolpoConfig::default() }.validate().is_err());
        assert_eq!(MolpoConfig::preset("margin_half").unwrap().lambda_margin, 0.5);
    }
}
