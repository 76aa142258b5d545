//! Evaluation metrics for molecule, caption, regression and classification
//! outputs.

use std::collections::HashMap;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::Serialize;

use crate::dataset::TaskGroup;
use crate::fingerprint::{morgan, path_fp, tanimoto, Fingerprint, DEFAULT_WIDTH};
use crate::molgraph::{canonical_smiles, parse_selfies, parse_smiles, MolError, MolGraph};
use crate::substruct::{maccs_keys, maccs_table};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {0} predictions, {1} references")]
    LengthMismatch(usize, usize),
    #[error("no examples")]
    Empty,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("a training-set mean is required to impute unparseable predictions")]
    MissingTrainMean,
    #[error("unparseable label `{0}`")]
    Label(String),
}

fn all_bracket_tokens(text: &str) -> bool {
    let mut rest = text;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix('.') {
            rest = r;
            continue;
        }
        let Some(end) = rest.strip_prefix('[').and_then(|r| r.find(']')) else { return false };
        rest = &rest[end + 2..];
    }
    !text.is_empty()
}

/// Reads a molecule written as SELFIES or SMILES. Strings made only of
/// bracket tokens are tried as SELFIES first, then as SMILES.
pub fn read_molecule(text: &str) -> Result<MolGraph, MolError> {
    let text = text.trim();
    if all_bracket_tokens(text) {
        if let Ok(g) = parse_selfies(text) {
            return Ok(g);
        }
    }
    parse_smiles(text)
}

/// [`read_molecule`], keeping only non-empty, valence-valid graphs.
pub fn parse_molecule(text: &str) -> Option<MolGraph> {
    read_molecule(text).ok().filter(|g| !g.is_empty() && g.validate().is_ok())
}

pub fn exact(pred: &str, reference: &str) -> u8 {
    match (parse_molecule(pred), parse_molecule(reference)) {
        (Some(a), Some(b)) => (canonical_smiles(&a) == canonical_smiles(&b)) as u8,
        _ => 0,
    }
}

/// Fraction of `preds` that parse to a valid molecule. An empty list scores 0.
pub fn validity<S: AsRef<str>>(preds: &[S]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().filter(|p| parse_molecule(p.as_ref()).is_some()).count() as f64 / preds.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FtsKind {
    Maccs,
    Morgan,
    Path,
}

impl FtsKind {
    pub const ALL: [FtsKind; 3] = [FtsKind::Maccs, FtsKind::Morgan, FtsKind::Path];

    pub fn fingerprint(self, g: &MolGraph) -> Fingerprint {
        match self {
            FtsKind::Maccs => maccs_keys(g, maccs_table()).fingerprint,
            FtsKind::Morgan => morgan(g, 2, DEFAULT_WIDTH),
            FtsKind::Path => path_fp(g, 1, 7, DEFAULT_WIDTH).expect("valid path bounds"),
        }
    }
}

/// Tanimoto similarity over the chosen fingerprint; 0 if either side fails
/// to parse.
pub fn fts(pred: &str, reference: &str, kind: FtsKind) -> f64 {
    match (parse_molecule(pred), parse_molecule(reference)) {
        (Some(a), Some(b)) => tanimoto(&kind.fingerprint(&a), &kind.fingerprint(&b)).expect("same width"),
        _ => 0.0,
    }
}

/// Lowercases and splits on whitespace. Punctuation characters become
/// tokens of their own, so "ring." gives "ring" and ".".
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch.is_ascii_punctuation() {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.extend(ch.to_lowercase());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped overlap and the total n-gram count of `pred`.
fn clipped_overlap<S: AsRef<str>>(pred: &[S], reference: &[S], n: usize) -> (usize, usize) {
    let p = ngram_counts(pred, n);
    let r = ngram_counts(reference, n);
    let overlap = p.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (overlap, pred.len().saturating_sub(n - 1))
}

fn bleu_from_counts(matches: &[usize], totals: &[usize], pred_len: usize, ref_len: usize) -> f64 {
    if pred_len == 0 || matches.iter().zip(totals).any(|(&m, &t)| m == 0 || t == 0) {
        return 0.0;
    }
    let n = matches.len() as f64;
    let log_p: f64 = matches.iter().zip(totals).map(|(&m, &t)| (m as f64 / t as f64).ln()).sum::<f64>() / n;
    let bp = if pred_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / pred_len as f64).exp() };
    bp * log_p.exp()
}

/// Sentence BLEU with uniform weights and no smoothing: any n-gram order
/// without a match gives 0. Not symmetric in its arguments.
pub fn bleu<S: AsRef<str>>(pred: &[S], reference: &[S], max_n: usize) -> f64 {
    assert!(max_n >= 1, "max_n must be at least 1");
    let (matches, totals): (Vec<_>, Vec<_>) = (1..=max_n).map(|n| clipped_overlap(pred, reference, n)).unzip();
    bleu_from_counts(&matches, &totals, pred.len(), reference.len())
}

/// Corpus BLEU: n-gram counts and lengths are summed over all pairs before
/// the precisions and brevity penalty are taken.
pub fn corpus_bleu<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)], max_n: usize) -> f64 {
    assert!(max_n >= 1, "max_n must be at least 1");
    let mut matches = vec![0; max_n];
    let mut totals = vec![0; max_n];
    let (mut pred_len, mut ref_len) = (0, 0);
    for (p, r) in pairs {
        for n in 1..=max_n {
            let (m, t) = clipped_overlap(p, r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
        pred_len += p.len();
        ref_len += r.len();
    }
    bleu_from_counts(&matches, &totals, pred_len, ref_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RougeVariant {
    R1,
    R2,
    Rl,
}

fn f1(overlap: usize, pred_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE F1 over whitespace tokens of the lowercased strings.
pub fn rouge(pred: &str, reference: &str, variant: RougeVariant) -> f64 {
    let p: Vec<String> = pred.to_lowercase().split_whitespace().map(str::to_string).collect();
    let r: Vec<String> = reference.to_lowercase().split_whitespace().map(str::to_string).collect();
    rouge_tokens(&p, &r, variant)
}

pub fn rouge_tokens<S: AsRef<str>>(pred: &[S], reference: &[S], variant: RougeVariant) -> f64 {
    match variant {
        RougeVariant::R1 | RougeVariant::R2 => {
            let n = if variant == RougeVariant::R1 { 1 } else { 2 };
            let (overlap, pred_total) = clipped_overlap(pred, reference, n);
            f1(overlap, pred_total, reference.len().saturating_sub(n - 1))
        }
        RougeVariant::Rl => f1(lcs_len(pred, reference), pred.len(), reference.len()),
    }
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

pub fn stem(word: &str) -> String {
    stemmer().stem(&word.to_lowercase()).into_owned()
}

const METEOR_ALPHA: f64 = 0.9;
const METEOR_BETA: f64 = 3.0;
const METEOR_GAMMA: f64 = 0.5;

/// Unigram alignment: exact matches first, then stem matches among the
/// tokens left over. Each stage pairs every prediction token with the
/// leftmost free reference token. Returns reference positions per
/// prediction token.
fn meteor_alignment<S: AsRef<str>>(pred: &[S], reference: &[S]) -> Vec<Option<usize>> {
    let mut aligned = vec![None; pred.len()];
    let mut used = vec![false; reference.len()];
    let stages: [fn(&str) -> String; 2] = [str::to_lowercase, stem];
    for key in stages {
        let ref_keys: Vec<String> = reference.iter().map(|t| key(t.as_ref())).collect();
        for (i, t) in pred.iter().enumerate() {
            if aligned[i].is_some() {
                continue;
            }
            let k = key(t.as_ref());
            if let Some(j) = (0..reference.len()).find(|&j| !used[j] && ref_keys[j] == k) {
                aligned[i] = Some(j);
                used[j] = true;
            }
        }
    }
    aligned
}

/// METEOR without the synonym stage. The fragmentation penalty uses
/// (chunks − 1) / matches, so one contiguous in-order alignment is not
/// penalised and identical strings score exactly 1.
pub fn meteor_lite<S: AsRef<str>>(pred: &[S], reference: &[S]) -> f64 {
    let aligned = meteor_alignment(pred, reference);
    let m = aligned.iter().flatten().count();
    if m == 0 {
        return 0.0;
    }
    let mut chunks = 0;
    let mut last: Option<(usize, usize)> = None;
    for (i, a) in aligned.iter().enumerate() {
        if let Some(j) = *a {
            if last != Some((i.wrapping_sub(1), j.wrapping_sub(1))) {
                chunks += 1;
            }
            last = Some((i, j));
        }
    }
    let p = m as f64 / pred.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let frag = (chunks - 1) as f64 / m as f64;
    fmean * (1.0 - METEOR_GAMMA * frag.powf(METEOR_BETA))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionReport {
    pub rmse: f64,
    pub mae: f64,
    pub invalid_rate: f64,
    pub n: usize,
}

/// Parses a numeric prediction; `None` for anything that is not a finite
/// number.
pub fn parse_number(text: &str) -> Option<f64> {
    text.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// RMSE and MAE. Predictions that are `None` are replaced by `train_mean`
/// and counted in `invalid_rate`.
pub fn regression_metrics(preds: &[Option<f64>], refs: &[f64], train_mean: f64) -> Result<RegressionReport, MetricError> {
    if preds.len() != refs.len() {
        return Err(MetricError::LengthMismatch(preds.len(), refs.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    if !train_mean.is_finite() {
        return Err(MetricError::NonFinite("train mean"));
    }
    if refs.iter().any(|r| !r.is_finite()) {
        return Err(MetricError::NonFinite("reference"));
    }
    let n = preds.len() as f64;
    let mut invalid = 0;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, r) in preds.iter().zip(refs) {
        let p = match p {
            Some(v) if v.is_finite() => *v,
            _ => {
                invalid += 1;
                train_mean
            }
        };
        se += (p - r).powi(2);
        ae += (p - r).abs();
    }
    Ok(RegressionReport { rmse: (se / n).sqrt(), mae: ae / n, invalid_rate: invalid as f64 / n, n: preds.len() })
}

/// Area under the ROC curve as the Mann–Whitney statistic, with tied
/// scores counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::NonFinite("score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average 1-based ranks over runs of equal scores.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Reads a binary label: true/false, yes/no or 1/0, case-insensitive.
pub fn parse_label(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "1.0" => Some(true),
        "false" | "no" | "0" | "0.0" => Some(false),
        _ => None,
    }
}

/// Aggregate metrics for one task group. Fields that do not apply stay
/// `None` and are left out of the JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub task_group: String,
    pub n: usize,
    pub invalid_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maccs_fts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morgan_fts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_fts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meteor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn text_metrics(report: &mut EvalReport, preds: &[String], refs: &[String]) {
    let toks: Vec<(Vec<String>, Vec<String>)> = preds.iter().zip(refs).map(|(p, r)| (tokenize(p), tokenize(r))).collect();
    report.bleu2 = Some(corpus_bleu(&toks, 2));
    report.bleu4 = Some(corpus_bleu(&toks, 4));
    report.rouge1 = Some(mean(toks.iter().map(|(p, r)| rouge_tokens(p, r, RougeVariant::R1))));
    report.rouge2 = Some(mean(toks.iter().map(|(p, r)| rouge_tokens(p, r, RougeVariant::R2))));
    report.rouge_l = Some(mean(toks.iter().map(|(p, r)| rouge_tokens(p, r, RougeVariant::Rl))));
    report.meteor = Some(mean(toks.iter().map(|(p, r)| meteor_lite(p, r))));
}

/// Scores aligned predictions and references for a task group.
///
/// Molecule groups (molgen, reaction) get exact match, validity and the
/// three fingerprint similarities; invalid predictions count as misses.
/// Text groups get BLEU, ROUGE and METEOR over [`tokenize`]; name
/// conversion also gets exact string match. Regression needs `train_mean`
/// for imputation. Classification predictions are positive-class
/// probabilities; unparseable ones are imputed as 0.5.
pub fn evaluate(group: TaskGroup, preds: &[String], refs: &[String], train_mean: Option<f64>) -> Result<EvalReport, MetricError> {
    if preds.len() != refs.len() {
        return Err(MetricError::LengthMismatch(preds.len(), refs.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = preds.len();
    let mut report = EvalReport { task_group: group.as_str().to_string(), n, ..EvalReport::default() };
    match group {
        TaskGroup::Molgen | TaskGroup::Reaction => {
            let graphs: Vec<(Option<MolGraph>, Option<MolGraph>)> =
                preds.iter().zip(refs).map(|(p, r)| (parse_molecule(p), parse_molecule(r))).collect();
            let valid = graphs.iter().filter(|(p, _)| p.is_some()).count() as f64 / n as f64;
            report.validity = Some(valid);
            report.invalid_rate = 1.0 - valid;
            report.exact = Some(mean(graphs.iter().map(|pair| match pair {
                (Some(a), Some(b)) => (canonical_smiles(a) == canonical_smiles(b)) as u8 as f64,
                _ => 0.0,
            })));
            let sim = |kind: FtsKind| {
                mean(graphs.iter().map(|pair| match pair {
                    (Some(a), Some(b)) => tanimoto(&kind.fingerprint(a), &kind.fingerprint(b)).expect("same width"),
                    _ => 0.0,
                }))
            };
            report.maccs_fts = Some(sim(FtsKind::Maccs));
            report.morgan_fts = Some(sim(FtsKind::Morgan));
            report.path_fts = Some(sim(FtsKind::Path));
        }
        TaskGroup::Captioning | TaskGroup::NameConversion => {
            report.invalid_rate = preds.iter().filter(|p| p.trim().is_empty()).count() as f64 / n as f64;
            text_metrics(&mut report, preds, refs);
            if group == TaskGroup::NameConversion {
                report.exact = Some(mean(preds.iter().zip(refs).map(|(p, r)| (p.trim() == r.trim()) as u8 as f64)));
            }
        }
        TaskGroup::PropertyRegression => {
            let refs: Vec<f64> = refs.iter().map(|r| parse_number(r).ok_or_else(|| MetricError::Label(r.clone()))).collect::<Result<_, _>>()?;
            let parsed: Vec<Option<f64>> = preds.iter().map(|p| parse_number(p)).collect();
            let mean_value = match train_mean {
                Some(m) => m,
                None if parsed.iter().all(Option::is_some) => 0.0,
                None => return Err(MetricError::MissingTrainMean),
            };
            let r = regression_metrics(&parsed, &refs, mean_value)?;
            report.rmse = Some(r.rmse);
            report.mae = Some(r.mae);
            report.invalid_rate = r.invalid_rate;
        }
        TaskGroup::PropertyClassification => {
            let labels: Vec<bool> = refs.iter().map(|r| parse_label(r).ok_or_else(|| MetricError::Label(r.clone()))).collect::<Result<_, _>>()?;
            let parsed: Vec<Option<f64>> = preds.iter().map(|p| parse_number(p).filter(|v| (0.0..=1.0).contains(v))).collect();
            report.invalid_rate = parsed.iter().filter(|p| p.is_none()).count() as f64 / n as f64;
            let scores: Vec<f64> = parsed.iter().map(|p| p.unwrap_or(0.5)).collect();
            report.roc_auc = Some(roc_auc(&scores, &labels)?);
        }
    }
    Ok(report)
}
