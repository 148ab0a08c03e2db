//! Detection metrics over scored, labeled sets: F1 at a threshold, AUROC,
//! FPR at a TPR target, detection error, and average precision with either
//! class as positive.
//!
//! Every metric is defined by a counting procedure followed by one fixed
//! float expression, so results are bit-identical to brute-force oracles
//! that count the same integers. Inliers are the positive class except in
//! `aupr` with outlier positives; a sample is predicted inlier when its
//! decision score is at or above the threshold.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Operating point used by `fpr_at_95tpr` and `detection_error`.
pub const DEFAULT_TPR_TARGET: f64 = 0.95;

/// Finite decision scores with outlier flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    is_outlier: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, is_outlier: Vec<bool>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidArgument("scored set is empty"));
        }
        if scores.len() != is_outlier.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                got: is_outlier.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                context: "decision scores",
            });
        }
        Ok(Self { scores, is_outlier })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn is_outlier(&self) -> &[bool] {
        &self.is_outlier
    }

    pub fn n_inliers(&self) -> usize {
        self.is_outlier.iter().filter(|&&o| !o).count()
    }

    pub fn n_outliers(&self) -> usize {
        self.is_outlier.iter().filter(|&&o| o).count()
    }

    fn require_both_classes(&self) -> Result<()> {
        if self.n_inliers() == 0 || self.n_outliers() == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    /// Members sorted by score descending (stable under total order).
    fn sorted_desc(&self) -> Vec<(f64, bool)> {
        let mut v: Vec<(f64, bool)> = self
            .scores
            .iter()
            .copied()
            .zip(self.is_outlier.iter().copied())
            .collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }
}

/// All six metrics of one evaluation, plus the class counts behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub f1: f64,
    pub auroc: f64,
    pub fpr_at_95tpr: f64,
    pub detection_error: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
    pub n_inliers: usize,
    pub n_outliers: usize,
}

/// Harmonic mean of precision and recall with inliers positive, predicted
/// positive iff `score >= gamma`; 0 when precision and recall are both 0.
pub fn f1(set: &ScoredSet, gamma: f64) -> Result<f64> {
    set.require_both_classes()?;
    if gamma.is_nan() {
        return Err(Error::InvalidArgument("threshold is NaN"));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fnn = 0usize;
    for (&s, &o) in set.scores.iter().zip(&set.is_outlier) {
        let predicted_inlier = s >= gamma;
        match (predicted_inlier, o) {
            (true, false) => tp += 1,
            (true, true) => fp += 1,
            (false, false) => fnn += 1,
            (false, true) => {}
        }
    }
    let denom = 2 * tp + fp + fnn;
    if denom == 0 {
        return Ok(0.0);
    }
    Ok((2 * tp) as f64 / denom as f64)
}

/// Probability that a random inlier outscores a random outlier, ties
/// counted one half (rank-sum formulation). Counted in integer half-units:
/// 2 per win, 1 per tie, divided once at the end.
pub fn auroc(set: &ScoredSet) -> Result<f64> {
    set.require_both_classes()?;
    let mut ins: Vec<f64> = Vec::with_capacity(set.n_inliers());
    let mut outs: Vec<f64> = Vec::with_capacity(set.n_outliers());
    for (&s, &o) in set.scores.iter().zip(&set.is_outlier) {
        if o {
            outs.push(s);
        } else {
            ins.push(s);
        }
    }
    ins.sort_by(f64::total_cmp);
    outs.sort_by(f64::total_cmp);
    let mut below = 0usize;
    let mut below_or_equal = 0usize;
    let mut units: u64 = 0;
    for &s in &ins {
        while below < outs.len() && outs[below] < s {
            below += 1;
        }
        if below_or_equal < below {
            below_or_equal = below;
        }
        while below_or_equal < outs.len() && outs[below_or_equal] <= s {
            below_or_equal += 1;
        }
        units += 2 * below as u64 + (below_or_equal - below) as u64;
    }
    Ok(units as f64 / (2 * ins.len() as u64 * outs.len() as u64) as f64)
}

/// `(tpr, fpr)` at the largest threshold whose TPR reaches `target`;
/// thresholds range over the distinct scores, walked descending.
fn operating_point(set: &ScoredSet, target: f64) -> Result<(f64, f64)> {
    set.require_both_classes()?;
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidArgument("TPR target must lie in (0,1]"));
    }
    let n_in = set.n_inliers();
    let n_out = set.n_outliers();
    let sorted = set.sorted_desc();
    let mut cnt_in = 0usize;
    let mut cnt_out = 0usize;
    let mut i = 0usize;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                cnt_out += 1;
            } else {
                cnt_in += 1;
            }
            j += 1;
        }
        let tpr = cnt_in as f64 / n_in as f64;
        if tpr >= target {
            return Ok((tpr, cnt_out as f64 / n_out as f64));
        }
        i = j;
    }
    // TPR reaches 1.0 at the smallest score, so a target <= 1 always lands.
    unreachable!("TPR never reached target <= 1")
}

/// FPR at the largest threshold achieving `TPR >= target`.
pub fn fpr_at_tpr(set: &ScoredSet, target: f64) -> Result<f64> {
    Ok(operating_point(set, target)?.1)
}

/// `0.5 (1 - TPR) + 0.5 FPR` at the default operating point.
pub fn detection_error(set: &ScoredSet) -> Result<f64> {
    let (tpr, fpr) = operating_point(set, DEFAULT_TPR_TARGET)?;
    Ok(0.5 * (1.0 - tpr) + 0.5 * fpr)
}

/// Which class counts as positive for average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveClass {
    Inlier,
    Outlier,
}

/// Average precision: step-wise sum of precision at each positive, no
/// interpolation; tied scores form one group whose positives all receive
/// the group's precision. Outlier positives rank by negated score.
pub fn aupr(set: &ScoredSet, positives: PositiveClass) -> Result<f64> {
    set.require_both_classes()?;
    let mut v: Vec<(f64, bool)> = set
        .scores
        .iter()
        .zip(&set.is_outlier)
        .map(|(&s, &o)| match positives {
            PositiveClass::Inlier => (s, !o),
            PositiveClass::Outlier => (-s, o),
        })
        .collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n_pos = v.iter().filter(|(_, p)| *p).count();
    let mut cum_pos = 0usize;
    let mut cum_cnt = 0usize;
    let mut sum = 0.0;
    let mut i = 0usize;
    while i < v.len() {
        let mut j = i;
        let mut group_pos = 0usize;
        while j < v.len() && v[j].0 == v[i].0 {
            if v[j].1 {
                group_pos += 1;
            }
            j += 1;
        }
        cum_cnt += j - i;
        cum_pos += group_pos;
        if group_pos > 0 {
            sum += group_pos as f64 * (cum_pos as f64 / cum_cnt as f64);
        }
        i = j;
    }
    Ok(sum / n_pos as f64)
}

/// Computes all six metrics; `gamma` feeds the F1 term.
pub fn compute_report(set: &ScoredSet, gamma: f64) -> Result<MetricsReport> {
    Ok(MetricsReport {
        f1: f1(set, gamma)?,
        auroc: auroc(set)?,
        fpr_at_95tpr: fpr_at_tpr(set, DEFAULT_TPR_TARGET)?,
        detection_error: detection_error(set)?,
        aupr_in: aupr(set, PositiveClass::Inlier)?,
        aupr_out: aupr(set, PositiveClass::Outlier)?,
        n_inliers: set.n_inliers(),
        n_outliers: set.n_outliers(),
    })
}
