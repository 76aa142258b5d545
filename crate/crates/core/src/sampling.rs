//! Functional-group frequency statistics and sparsity-aware importance
//! sampling of pre-training molecules.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::substruct::FunctionalGroupLabel;

pub const EPSILON: f64 = 1e-6;

/// Groups dropped from the top and bottom of the frequency ranking.
pub const DROP_MOST_FREQUENT: usize = 11;
pub const DROP_LEAST_FREQUENT: usize = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("label {index} has {found} groups, expected {expected}")]
    LengthMismatch { index: usize, expected: usize, found: usize },
    #[error("every sampling weight is zero")]
    AllZero,
    #[error("need at least {needed} groups to filter, got {found}")]
    TooFewGroups { needed: usize, found: usize },
    #[error("retained index {0} is out of range")]
    Override(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub counts: Vec<u64>,
    pub epsilon: f64,
    pub scale: Vec<f64>,
    pub num_molecules: usize,
}

impl GroupStats {
    pub fn from_counts(counts: Vec<u64>, num_molecules: usize, epsilon: f64) -> GroupStats {
        let scale = counts.iter().map(|&c| 1.0 / (c as f64 + epsilon)).collect();
        GroupStats { counts, epsilon, scale, num_molecules }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingWeights {
    pub sigma: Vec<f64>,
    pub p: Vec<f64>,
}

fn check_lengths(labels: &[FunctionalGroupLabel], expected: usize) -> Result<(), SamplingError> {
    for (index, l) in labels.iter().enumerate() {
        if l.len() != expected {
            return Err(SamplingError::LengthMismatch { index, expected, found: l.len() });
        }
    }
    Ok(())
}

/// Per-group occurrence counts. An empty list gives zero groups; use
/// [`count_groups_width`] to fix the width.
pub fn count_groups(labels: &[FunctionalGroupLabel]) -> Result<GroupStats, SamplingError> {
    count_groups_width(labels, labels.first().map_or(0, |l| l.len()))
}

pub fn count_groups_width(labels: &[FunctionalGroupLabel], width: usize) -> Result<GroupStats, SamplingError> {
    check_lengths(labels, width)?;
    let mut counts = vec![0u64; width];
    for l in labels {
        for (c, &b) in counts.iter_mut().zip(&l.bits) {
            *c += (b != 0) as u64;
        }
    }
    Ok(GroupStats::from_counts(counts, labels.len(), EPSILON))
}

/// σ_i = (Σ_g x_ig s_g)², normalized into a categorical distribution.
/// When every σ is zero, `p` is all zeros.
pub fn weights(labels: &[FunctionalGroupLabel], stats: &GroupStats) -> Result<SamplingWeights, SamplingError> {
    check_lengths(labels, stats.counts.len())?;
    let sigma: Vec<f64> = labels
        .iter()
        .map(|l| {
            let s: f64 = l.bits.iter().zip(&stats.scale).filter(|(&b, _)| b != 0).map(|(_, &s)| s).sum();
            s * s
        })
        .collect();
    let total: f64 = sigma.iter().sum();
    let p = if total > 0.0 { sigma.iter().map(|s| s / total).collect() } else { vec![0.0; sigma.len()] };
    Ok(SamplingWeights { sigma, p })
}

/// `n` independent draws from `p`, with replacement.
pub fn sample(weights: &SamplingWeights, n: usize, seed: u64) -> Result<Vec<usize>, SamplingError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let dist = WeightedIndex::new(&weights.p).map_err(|_| SamplingError::AllZero)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub retained: Vec<usize>,
    pub dropped_frequent: Vec<usize>,
    pub dropped_rare: Vec<usize>,
}

impl FilterOutcome {
    pub fn retained_count(&self) -> usize {
        self.retained.len()
    }
}

/// Drops the most frequent and the rarest groups. Among equal counts the
/// lower index is dropped first. The retained count is whatever remains;
/// for 87 groups that is 75.
pub fn filter_groups(counts: &[u64]) -> Result<FilterOutcome, SamplingError> {
    let needed = DROP_MOST_FREQUENT + DROP_LEAST_FREQUENT + 1;
    if counts.len() < needed {
        return Err(SamplingError::TooFewGroups { needed, found: counts.len() });
    }
    let mut by_desc: Vec<usize> = (0..counts.len()).collect();
    by_desc.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut dropped_frequent: Vec<usize> = by_desc[..DROP_MOST_FREQUENT].to_vec();
    let mut rest: Vec<usize> = by_desc[DROP_MOST_FREQUENT..].to_vec();
    rest.sort_by(|&a, &b| counts[a].cmp(&counts[b]).then(a.cmp(&b)));
    let mut dropped_rare: Vec<usize> = rest[..DROP_LEAST_FREQUENT].to_vec();
    let mut retained: Vec<usize> = rest[DROP_LEAST_FREQUENT..].to_vec();
    dropped_frequent.sort_unstable();
    dropped_rare.sort_unstable();
    retained.sort_unstable();
    Ok(FilterOutcome { retained, dropped_frequent, dropped_rare })
}

/// Restricts labels to the given group indices, in the given order.
pub fn select_groups(labels: &[FunctionalGroupLabel], retained: &[usize]) -> Result<Vec<FunctionalGroupLabel>, SamplingError> {
    labels
        .iter()
        .map(|l| {
            retained
                .iter()
                .map(|&g| l.bits.get(g).copied().ok_or(SamplingError::Override(g)))
                .collect::<Result<Vec<u8>, _>>()
                .map(|bits| FunctionalGroupLabel { bits })
        })
        .collect()
}

/// Shannon entropy (nats) of the normalized count vector.
pub fn count_entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / total as f64;
            -q * q.ln()
        })
        .sum()
}

/// Group counts over the molecules at `indices` (with multiplicity).
pub fn counts_of(labels: &[FunctionalGroupLabel], indices: &[usize]) -> Vec<u64> {
    let width = labels.first().map_or(0, |l| l.len());
    let mut counts = vec![0u64; width];
    for &i in indices {
        for (c, &b) in counts.iter_mut().zip(&labels[i].bits) {
            *c += (b != 0) as u64;
        }
    }
    counts
}

/// A synthetic label corpus with a long-tailed group distribution: group
/// `g` is present with probability `0.5 · 0.7^g`.
pub fn synthetic_labels(molecules: usize, groups: usize, seed: u64) -> Vec<FunctionalGroupLabel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..molecules)
        .map(|_| FunctionalGroupLabel {
            bits: (0..groups).map(|g| rng.gen_bool(0.5 * 0.7f64.powi(g as i32)) as u8).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(bits: &[u8]) -> FunctionalGroupLabel {
        FunctionalGroupLabel { bits: bits.to_vec() }
    }

    #[test]
    fn counting() {
        assert!(count_groups_width(&[], 3).unwrap().counts.iter().all(|&c| c == 0));
        let stats = count_groups(&[label(&[1, 0, 1]), label(&[1, 0, 0])]).unwrap();
        assert_eq!(stats.counts, vec![2, 0, 1]);
        assert_eq!(count_groups(&[label(&[1, 1, 1])]).unwrap().counts, vec![1, 1, 1]);
        assert!(matches!(
            count_groups(&[label(&[1, 0]), label(&[1])]),
            Err(SamplingError::LengthMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn two_molecule_weights() {
        let labels = [label(&[1, 1]), label(&[1, 0])];
        let stats = count_groups(&labels).unwrap();
        let w = weights(&labels, &stats).unwrap();
        // Hand evaluation with ε = 0: s = (1/2, 1).
        let (sa, sb) = ((0.5f64 + 1.0).powi(2), 0.5f64.powi(2));
        assert!((w.sigma[0] - sa).abs() < 1e-5 && (w.sigma[1] - sb).abs() < 1e-5);
        assert!((w.p[0] - sa / (sa + sb)).abs() < 1e-5);
        assert!((w.p[1] - 0.1).abs() < 1e-5);
    }

    #[test]
    fn zero_group_molecule_is_never_drawn() {
        let labels = [label(&[1, 0]), label(&[0, 0])];
        let w = weights(&labels, &count_groups(&labels).unwrap()).unwrap();
        assert_eq!(w.p, vec![1.0, 0.0]);
        assert_eq!(sample(&w, 5, 1).unwrap(), vec![0; 5]);
        assert!(sample(&w, 0, 1).unwrap().is_empty());
        let none = [label(&[0, 0])];
        let w0 = weights(&none, &count_groups(&none).unwrap()).unwrap();
        assert_eq!(sample(&w0, 3, 1), Err(SamplingError::AllZero));
    }

    #[test]
    fn filtering() {
        let ascending: Vec<u64> = (0..87).collect();
        let out = filter_groups(&ascending).unwrap();
        assert_eq!(out.retained, (1..76).collect::<Vec<_>>());
        assert_eq!(out.dropped_rare, vec![0]);
        let flat = filter_groups(&[5; 87]).unwrap();
        assert_eq!(flat.dropped_frequent, (0..11).collect::<Vec<_>>());
        assert_eq!(flat.dropped_rare, vec![11]);
        assert_eq!(flat.retained_count(), 75);
        assert!(filter_groups(&[1; 12]).is_err());
    }

    #[test]
    fn selecting_columns() {
        let l = [label(&[1, 0, 1, 1])];
        assert_eq!(select_groups(&l, &[3, 1]).unwrap(), vec![label(&[1, 0])]);
        assert_eq!(select_groups(&l, &[4]), Err(SamplingError::Override(4)));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(count_entropy(&[0, 0]), 0.0);
        assert!((count_entropy(&[3, 3]) - 2f64.ln()).abs() < 1e-12);
    }
}
