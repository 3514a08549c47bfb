//! Step-up multiple testing procedures: BH, the adaptive one-way GBH
//! weighting (GBH₁), its leave-one-out weights, and Storey's procedure.
//!
//! Indices are zero-based throughout.

use serde::Serialize;

use crate::error::{Error, Result};

/// P-values together with a partition of their indices into groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPValues {
    pvalues: Vec<f64>,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupedPValues {
    /// Builds from explicit index sets. The sets must partition `0..m`.
    pub fn new(pvalues: Vec<f64>, groups: Vec<Vec<usize>>) -> Result<Self> {
        let m = pvalues.len();
        if m == 0 {
            return Err(Error::InvalidInput("no p-values".into()));
        }
        if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!("p-value {p} outside [0, 1]")));
        }
        if groups.is_empty() {
            return Err(Error::InvalidInput("at least one group is required".into()));
        }
        let mut group_of = vec![usize::MAX; m];
        for (j, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidInput(format!("group {j} is empty")));
            }
            for &i in members {
                if i >= m {
                    return Err(Error::InvalidInput(format!("index {i} out of range for m = {m}")));
                }
                if group_of[i] != usize::MAX {
                    return Err(Error::InvalidInput(format!("index {i} appears in two groups")));
                }
                group_of[i] = j;
            }
        }
        if let Some(i) = group_of.iter().position(|&j| j == usize::MAX) {
            return Err(Error::InvalidInput(format!("index {i} is not in any group")));
        }
        Ok(Self {
            pvalues,
            groups,
            group_of,
        })
    }

    /// Builds from one group label per p-value. Labels need not be contiguous;
    /// groups are numbered in order of first appearance.
    pub fn from_labels<L: PartialEq>(pvalues: Vec<f64>, labels: &[L]) -> Result<Self> {
        if labels.len() != pvalues.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} p-values",
                labels.len(),
                pvalues.len()
            )));
        }
        let mut seen: Vec<&L> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            match seen.iter().position(|l| *l == label) {
                Some(j) => groups[j].push(i),
                None => {
                    seen.push(label);
                    groups.push(vec![i]);
                }
            }
        }
        Self::new(pvalues, groups)
    }

    /// All p-values in one group.
    pub fn single_group(pvalues: Vec<f64>) -> Result<Self> {
        let groups = vec![(0..pvalues.len()).collect()];
        Self::new(pvalues, groups)
    }

    /// Contiguous groups of the given sizes.
    pub fn contiguous(pvalues: Vec<f64>, sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&n| {
                let g = (start..start + n).collect();
                start += n;
                g
            })
            .collect();
        Self::new(pvalues, groups)
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    pub fn m(&self) -> usize {
        self.pvalues.len()
    }

    pub fn g(&self) -> usize {
        self.groups.len()
    }
}

/// Group weights with the threshold counts they were built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GbhWeights {
    /// One weight per group; `+inf` when the group has no p-value at or below λ.
    pub weights: Vec<f64>,
    /// R(λ): number of p-values at or below λ.
    pub total_below: usize,
    /// R_j(λ) per group.
    pub group_below: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionResult {
    /// Rejected indices in ascending order.
    pub rejected: Vec<usize>,
    pub k_star: usize,
    /// `k* α / m`; every score at or below it is rejected.
    pub threshold: f64,
    /// The scores the step-up was run on.
    pub weighted_pvalues: Vec<f64>,
}

impl RejectionResult {
    pub fn is_rejected(&self, i: usize) -> bool {
        self.rejected.binary_search(&i).is_ok()
    }

    pub fn num_rejections(&self) -> usize {
        self.k_star
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("alpha must lie in (0, 1)", alpha))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("lambda must lie in (0, 1)", lambda))
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no scores".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidInput(format!("score {s} is negative or NaN")));
    }
    Ok(())
}

#[inline]
fn step_threshold(k: usize, alpha: f64, m: usize) -> f64 {
    k as f64 * alpha / m as f64
}

fn collect_rejections(scores: Vec<f64>, k_star: usize, alpha: f64) -> RejectionResult {
    let m = scores.len();
    let threshold = step_threshold(k_star, alpha, m);
    let rejected = if k_star == 0 {
        Vec::new()
    } else {
        (0..m).filter(|&i| scores[i] <= threshold).collect()
    };
    debug_assert_eq!(rejected.len(), k_star);
    RejectionResult {
        rejected,
        k_star,
        threshold,
        weighted_pvalues: scores,
    }
}

/// Benjamini–Hochberg step-up on nonnegative scores (which may exceed 1 or
/// be `+inf`): rejects every score at or below `k* α / m` where
/// `k* = max{k : score_(k) <= k α / m}`.
pub fn bh_step_up(scores: &[f64], alpha: f64) -> Result<RejectionResult> {
    check_alpha(alpha)?;
    check_scores(scores)?;
    Ok(bh_step_up_unchecked(scores.to_vec(), alpha))
}

pub(crate) fn bh_step_up_unchecked(scores: Vec<f64>, alpha: f64) -> RejectionResult {
    let m = scores.len();
    let mut sorted = scores.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let k_star = (1..=m)
        .rev()
        .find(|&k| sorted[k - 1] <= step_threshold(k, alpha, m))
        .unwrap_or(0);
    collect_rejections(scores, k_star, alpha)
}

/// Number of rejections only; avoids building the index set.
pub(crate) fn bh_count(scores: &mut [f64], alpha: f64) -> usize {
    let m = scores.len();
    scores.sort_unstable_by(f64::total_cmp);
    (1..=m)
        .rev()
        .find(|&k| scores[k - 1] <= step_threshold(k, alpha, m))
        .unwrap_or(0)
}

/// Brute-force step-up reference: for each k from m down to 1, counts the
/// scores at or below `k α / m` and stops at the first k with at least k of
/// them. No sorting involved.
pub fn step_up_oracle(scores: &[f64], alpha: f64) -> RejectionResult {
    let m = scores.len();
    let k_star = (1..=m)
        .rev()
        .find(|&k| {
            let t = step_threshold(k, alpha, m);
            scores.iter().filter(|&&s| s <= t).count() >= k
        })
        .unwrap_or(0);
    collect_rejections(scores.to_vec(), k_star, alpha)
}

fn below_counts(gp: &GroupedPValues, lambda: f64) -> (usize, Vec<usize>) {
    let group_below: Vec<usize> = gp
        .groups
        .iter()
        .map(|members| members.iter().filter(|&&i| gp.pvalues[i] <= lambda).count())
        .collect();
    (group_below.iter().sum(), group_below)
}

/// GBH₁ weights
/// `w_j = (n_j - R_j(λ) + 1)(R(λ) + g - 1) / (m (1 - λ) R_j(λ))`,
/// with `w_j = +inf` when `R_j(λ) = 0`.
pub fn gbh1_weights(gp: &GroupedPValues, lambda: f64) -> Result<GbhWeights> {
    check_lambda(lambda)?;
    let (total_below, group_below) = below_counts(gp, lambda);
    let m = gp.m() as f64;
    let g = gp.g() as f64;
    let weights = gp
        .groups
        .iter()
        .zip(&group_below)
        .map(|(members, &rj)| {
            if rj == 0 {
                f64::INFINITY
            } else {
                let n_j = members.len() as f64;
                let rj = rj as f64;
                (n_j - rj + 1.0) * (total_below as f64 + g - 1.0) / (m * (1.0 - lambda) * rj)
            }
        })
        .collect();
    Ok(GbhWeights {
        weights,
        total_below,
        group_below,
    })
}

/// Leave-one-out weights with p-value `k` removed from the counts:
/// `w_j^(-k) = (n_j - R_j^(-k))(R^(-k) + g) / (m (1 - λ)(R_j^(-k) + 1))`.
/// Every weight is finite. The returned counts are the leave-one-out counts.
pub fn gbh1_weights_loo(gp: &GroupedPValues, lambda: f64, k: usize) -> Result<GbhWeights> {
    check_lambda(lambda)?;
    if k >= gp.m() {
        return Err(Error::InvalidInput(format!(
            "index {k} out of range for m = {}",
            gp.m()
        )));
    }
    let (mut total_below, mut group_below) = below_counts(gp, lambda);
    if gp.pvalues[k] <= lambda {
        total_below -= 1;
        group_below[gp.group_of[k]] -= 1;
    }
    let m = gp.m() as f64;
    let g = gp.g() as f64;
    let weights = gp
        .groups
        .iter()
        .zip(&group_below)
        .map(|(members, &rj)| {
            let n_j = members.len() as f64;
            let rj = rj as f64;
            (n_j - rj) * (total_below as f64 + g) / (m * (1.0 - lambda) * (rj + 1.0))
        })
        .collect();
    Ok(GbhWeights {
        weights,
        total_below,
        group_below,
    })
}

/// `p * w`, with any infinite weight giving `+inf`. An infinite weight means
/// the group has no p-value at or below λ > 0, so `p = 0` cannot occur there.
#[inline]
fn weigh(p: f64, w: f64) -> f64 {
    if w.is_infinite() {
        debug_assert!(p > 0.0, "p = 0 in a group with no p-value at or below lambda");
        f64::INFINITY
    } else {
        p * w
    }
}

/// Adaptive one-way GBH: weight each p-value by its group weight and run
/// BH at level `alpha` on the weighted values.
pub fn gbh1(gp: &GroupedPValues, lambda: f64, alpha: f64) -> Result<RejectionResult> {
    check_alpha(alpha)?;
    let w = gbh1_weights(gp, lambda)?;
    let scores = gbh1_scores(gp, &w);
    Ok(bh_step_up_unchecked(scores, alpha))
}

pub(crate) fn gbh1_scores(gp: &GroupedPValues, w: &GbhWeights) -> Vec<f64> {
    gp.pvalues
        .iter()
        .zip(&gp.group_of)
        .map(|(&p, &j)| weigh(p, w.weights[j]))
        .collect()
}

/// Storey's adaptive BH: every p-value is multiplied by
/// `π̂₀ = (m - R(λ) + 1) / (m (1 - λ))` before the step-up.
pub fn storey(pvalues: &[f64], lambda: f64, alpha: f64) -> Result<RejectionResult> {
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    check_scores(pvalues)?;
    if let Some(p) = pvalues.iter().find(|p| **p > 1.0) {
        return Err(Error::InvalidInput(format!("p-value {p} outside [0, 1]")));
    }
    let w = storey_weight(pvalues, lambda);
    let scores = pvalues.iter().map(|p| p * w).collect();
    Ok(bh_step_up_unchecked(scores, alpha))
}

pub(crate) fn storey_weight(pvalues: &[f64], lambda: f64) -> f64 {
    let m = pvalues.len() as f64;
    let below = pvalues.iter().filter(|&&p| p <= lambda).count() as f64;
    (m - below + 1.0) / (m * (1.0 - lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn bh_small_examples() {
        let r = bh_step_up(&[0.01, 0.02, 0.9], 0.05).unwrap();
        assert_eq!(r.k_star, 2);
        assert_eq!(r.rejected, vec![0, 1]);

        let r = bh_step_up(&[1.0; 6], 0.05).unwrap();
        assert_eq!(r.k_star, 0);
        assert!(r.rejected.is_empty());

        let r = bh_step_up(&[0.015, 0.3, 0.9, 1.35], 0.1).unwrap();
        assert_eq!(r.k_star, 1);
        assert_eq!(r.rejected, vec![0]);
        assert!(close(r.threshold, 0.025));
    }

    #[test]
    fn bh_errors() {
        assert!(bh_step_up(&[], 0.05).is_err());
        assert!(bh_step_up(&[0.1], 0.0).is_err());
        assert!(bh_step_up(&[0.1], 1.0).is_err());
        assert!(bh_step_up(&[-0.1], 0.05).is_err());
        assert!(bh_step_up(&[f64::NAN], 0.05).is_err());
    }

    #[test]
    fn bh_handles_infinite_scores_and_ties() {
        let r = bh_step_up(&[0.01, f64::INFINITY, 0.01, 3.0], 0.05).unwrap();
        assert_eq!(r.rejected, vec![0, 2]);
        // Equal scores are rejected together.
        let r = bh_step_up(&[0.03, 0.03, 0.03], 0.05).unwrap();
        assert_eq!(r.k_star, 3);
    }

    #[test]
    fn oracle_single_values() {
        assert_eq!(step_up_oracle(&[0.04], 0.05).k_star, 1);
        assert_eq!(step_up_oracle(&[0.06], 0.05).k_star, 0);
    }

    #[test]
    fn bh_matches_oracle_on_small_grid() {
        let vals = [0.01, 0.5, 1.0];
        for code in 0..3usize.pow(8) {
            let mut c = code;
            let scores: Vec<f64> = (0..8)
                .map(|_| {
                    let v = vals[c % 3];
                    c /= 3;
                    v
                })
                .collect();
            assert_eq!(bh_step_up(&scores, 0.05).unwrap(), step_up_oracle(&scores, 0.05));
        }
    }

    #[test]
    fn grouped_validation() {
        assert!(GroupedPValues::new(vec![], vec![]).is_err());
        assert!(GroupedPValues::new(vec![0.1, 0.2], vec![vec![0]]).is_err());
        assert!(GroupedPValues::new(vec![0.1, 0.2], vec![vec![0, 1], vec![1]]).is_err());
        assert!(GroupedPValues::new(vec![0.1, 0.2], vec![vec![0, 1], vec![]]).is_err());
        assert!(GroupedPValues::new(vec![0.1, 1.2], vec![vec![0, 1]]).is_err());
        assert!(GroupedPValues::new(vec![0.1, 0.2], vec![vec![0, 2]]).is_err());
        let gp = GroupedPValues::from_labels(vec![0.1, 0.2, 0.3], &["b", "a", "b"]).unwrap();
        assert_eq!(gp.groups(), &[vec![0, 2], vec![1]]);
        assert_eq!(gp.group_of(1), 1);
    }

    #[test]
    fn weights_worked_example() {
        let gp = GroupedPValues::single_group(vec![0.01, 0.2, 0.6, 0.9]).unwrap();
        let w = gbh1_weights(&gp, 0.5).unwrap();
        assert_eq!(w.total_below, 2);
        assert!(close(w.weights[0], 1.5));

        let r = gbh1(&gp, 0.5, 0.1).unwrap();
        assert_eq!(r.rejected, vec![0]);
    }

    #[test]
    fn weights_two_full_groups() {
        let lambda = 0.3;
        let gp = GroupedPValues::contiguous(vec![0.01, 0.1, 0.2, 0.05, 0.15, 0.25], &[3, 3]).unwrap();
        let w = gbh1_weights(&gp, lambda).unwrap();
        let expected = 7.0 / (18.0 * (1.0 - lambda));
        assert!(close(w.weights[0], expected));
        assert!(close(w.weights[1], expected));
    }

    #[test]
    fn empty_group_gets_infinite_weight() {
        let gp = GroupedPValues::contiguous(vec![0.001, 0.002, 0.7, 0.8], &[2, 2]).unwrap();
        let w = gbh1_weights(&gp, 0.5).unwrap();
        assert!(w.weights[0].is_finite());
        assert_eq!(w.weights[1], f64::INFINITY);
        let r = gbh1(&gp, 0.5, 0.05).unwrap();
        assert_eq!(r.weighted_pvalues[2], f64::INFINITY);
        assert!(!r.is_rejected(2) && !r.is_rejected(3));
        assert!(gbh1_weights(&gp, 0.0).is_err());
        assert!(gbh1_weights(&gp, 1.0).is_err());
    }

    #[test]
    fn all_ones_reject_nothing() {
        let gp = GroupedPValues::contiguous(vec![1.0; 6], &[3, 3]).unwrap();
        assert_eq!(gbh1(&gp, 0.5, 0.05).unwrap().k_star, 0);
    }

    #[test]
    fn loo_worked_example() {
        let gp = GroupedPValues::single_group(vec![0.01, 0.2, 0.6, 0.9]).unwrap();
        let w = gbh1_weights_loo(&gp, 0.5, 0).unwrap();
        assert_eq!(w.total_below, 1);
        assert!(close(w.weights[0], 1.5));
        assert!(gbh1_weights_loo(&gp, 0.5, 4).is_err());
    }

    #[test]
    fn loo_relation_when_removed_pvalue_is_large() {
        // Removing a p-value above λ only changes the group-size terms:
        // w^(-k) = w (n_j - R_j) R_j (R + g) / ((n_j - R_j + 1)(R_j + 1)(R + g - 1)).
        let gp = GroupedPValues::contiguous(vec![0.01, 0.3, 0.7, 0.9, 0.02, 0.6, 0.04, 0.8], &[4, 2, 2]).unwrap();
        let lambda = 0.5;
        let w = gbh1_weights(&gp, lambda).unwrap();
        let (g, r) = (gp.g() as f64, w.total_below as f64);
        for k in [2usize, 3, 5, 7] {
            let j = gp.group_of(k);
            let (nj, rj) = (gp.groups()[j].len() as f64, w.group_below[j] as f64);
            let loo = gbh1_weights_loo(&gp, lambda, k).unwrap();
            let expected = w.weights[j] * (nj - rj) * rj * (r + g) / ((nj - rj + 1.0) * (rj + 1.0) * (r + g - 1.0));
            assert!(close(loo.weights[j], expected), "k={k}");
        }
    }

    #[test]
    fn storey_examples() {
        let p: Vec<f64> = (0..10).map(|i| 0.55 + 0.04 * i as f64).collect();
        assert!(close(storey_weight(&p, 0.5), 11.0 / 5.0));
        assert_eq!(storey(&p, 0.5, 0.05).unwrap().k_star, 0);

        let p = vec![0.001; 5];
        assert!(close(storey_weight(&p, 0.5), 0.4));
        let r = storey(&p, 0.5, 0.05).unwrap();
        assert_eq!(r.rejected, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn storey_and_gbh1_can_differ_when_nothing_is_below_lambda() {
        // R(λ) = 0: GBH₁ uses an infinite weight, Storey a finite one.
        // With λ/(1-λ) < α Storey can still reject.
        let p = vec![0.02];
        let gp = GroupedPValues::single_group(p.clone()).unwrap();
        assert_eq!(storey(&p, 0.01, 0.05).unwrap().k_star, 1);
        assert_eq!(gbh1(&gp, 0.01, 0.05).unwrap().k_star, 0);
    }
}
