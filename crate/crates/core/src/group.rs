//! Grouped features: indicator side information and the penalty-level
//! equivalence between fwelnet with group indicators and a group-lasso-type
//! penalty.
//!
//! With `Z` the group indicator matrix, every feature in group `k` gets the
//! same factor, which can be written `1 / (p v_k)` with `sum_k p_k v_k = 1`.
//! For fixed `beta`, the weighted penalty
//! `(lambda/p) sum_k (1/v_k) P_k`, `P_k = alpha |b_k|_1 + (1-alpha)/2 |b_k|_2^2`,
//! is bounded below by `(lambda/p) (sum_k sqrt(p_k P_k))^2` (Cauchy-Schwarz),
//! with equality at `v_k ∝ sqrt(P_k / p_k)`.

use ndarray::Array2;

use crate::error::{FwelnetError, Result};
use crate::fwelnet::FeatureInfo;

/// Non-overlapping, exhaustive assignment of features to groups `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    group_of: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupStructure {
    pub fn new(group_of: Vec<usize>) -> Result<Self> {
        let k = group_of.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; k];
        for g in &group_of {
            sizes[*g] += 1;
        }
        if let Some(empty) = sizes.iter().position(|s| *s == 0) {
            return Err(FwelnetError::InvalidInput(format!("group {empty} has no features")));
        }
        if group_of.is_empty() {
            return Err(FwelnetError::InvalidInput("no features".into()));
        }
        Ok(Self { group_of, sizes })
    }

    /// `k` consecutive groups of `size` features each.
    pub fn contiguous(k: usize, size: usize) -> Result<Self> {
        Self::new((0..k * size).map(|j| j / size).collect())
    }

    pub fn p(&self) -> usize {
        self.group_of.len()
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }
}

/// Per-group weights `v_k` with `sum_k p_k v_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWeights {
    pub v: Vec<f64>,
}

/// `p x K` 0/1 matrix: `z_jk = 1` iff feature `j` is in group `k`.
pub fn grouped_indicator_z(groups: &GroupStructure) -> FeatureInfo {
    let mut z = Array2::zeros((groups.p(), groups.k()));
    for (j, g) in groups.group_of.iter().enumerate() {
        z[[j, *g]] = 1.0;
    }
    FeatureInfo::new(z).expect("indicator entries are finite")
}

fn group_terms(beta: &[f64], groups: &GroupStructure, alpha: f64) -> Result<Vec<f64>> {
    if beta.len() != groups.p() {
        return Err(FwelnetError::Dimension(format!(
            "beta has {} entries for {} grouped features",
            beta.len(),
            groups.p()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FwelnetError::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut terms = vec![0.0; groups.k()];
    for (b, g) in beta.iter().zip(&groups.group_of) {
        terms[*g] += alpha * b.abs() + 0.5 * (1.0 - alpha) * b * b;
    }
    Ok(terms)
}

/// Group weights minimizing the weighted penalty for this `beta`:
/// `v_k = a_k / sum_l p_l a_l` with `a_k = sqrt(P_k / p_k)`. Falls back to
/// the uniform `v_k = 1/p` when `beta = 0`.
pub fn optimal_group_weights(beta: &[f64], groups: &GroupStructure, alpha: f64) -> Result<GroupWeights> {
    let terms = group_terms(beta, groups, alpha)?;
    let a: Vec<f64> = terms
        .iter()
        .zip(&groups.sizes)
        .map(|(t, pk)| (t / *pk as f64).sqrt())
        .collect();
    let denom: f64 = a.iter().zip(&groups.sizes).map(|(ak, pk)| ak * *pk as f64).sum();
    let v = if denom == 0.0 {
        vec![1.0 / groups.p() as f64; groups.k()]
    } else {
        a.iter().map(|ak| ak / denom).collect()
    };
    Ok(GroupWeights { v })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceCheck {
    /// Weighted penalty at the given group weights.
    pub lhs: f64,
    /// Cauchy-Schwarz lower bound `(lambda/p) (sum_k sqrt(p_k P_k))^2`.
    pub rhs: f64,
    pub gap: f64,
}

/// Weighted penalty `(lambda/p) sum_k P_k / v_k` at the supplied weights.
/// Groups with `P_k = 0` contribute nothing, whatever their weight.
pub fn weighted_group_penalty(
    beta: &[f64],
    groups: &GroupStructure,
    alpha: f64,
    lambda: f64,
    weights: &GroupWeights,
) -> Result<f64> {
    let terms = group_terms(beta, groups, alpha)?;
    if weights.v.len() != groups.k() {
        return Err(FwelnetError::Dimension(format!(
            "{} group weights for {} groups",
            weights.v.len(),
            groups.k()
        )));
    }
    let s: f64 = terms
        .iter()
        .zip(&weights.v)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, v)| t / v)
        .sum();
    Ok(lambda / groups.p() as f64 * s)
}

/// The lower bound `(lambda/p) (sum_k sqrt(p_k P_k))^2`.
pub fn group_bound(beta: &[f64], groups: &GroupStructure, alpha: f64, lambda: f64) -> Result<f64> {
    let terms = group_terms(beta, groups, alpha)?;
    let s: f64 = terms
        .iter()
        .zip(&groups.sizes)
        .map(|(t, pk)| (*pk as f64 * t).sqrt())
        .sum();
    Ok(lambda / groups.p() as f64 * s * s)
}

/// Compare the weighted penalty at the optimal group weights with the
/// Cauchy-Schwarz bound; the gap is zero up to rounding.
pub fn penalty_equivalence_check(
    beta: &[f64],
    groups: &GroupStructure,
    alpha: f64,
    lambda: f64,
) -> Result<EquivalenceCheck> {
    let v = optimal_group_weights(beta, groups, alpha)?;
    penalty_gap(beta, groups, alpha, lambda, &v)
}

/// Same comparison at arbitrary feasible weights; the gap is nonnegative.
pub fn penalty_gap(
    beta: &[f64],
    groups: &GroupStructure,
    alpha: f64,
    lambda: f64,
    weights: &GroupWeights,
) -> Result<EquivalenceCheck> {
    let lhs = weighted_group_penalty(beta, groups, alpha, lambda, weights)?;
    let rhs = group_bound(beta, groups, alpha, lambda)?;
    Ok(EquivalenceCheck {
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

/// Penalty factors `w_j = 1 / (p v_k)` implied by group weights.
pub fn factors_from_group_weights(groups: &GroupStructure, weights: &GroupWeights) -> Vec<f64> {
    let p = groups.p() as f64;
    groups.group_of.iter().map(|g| 1.0 / (p * weights.v[*g])).collect()
}
