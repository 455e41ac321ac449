//! Confusion-matrix ratios, ROC-AUC and average precision per factor, and
//! the macro summary used for model selection.

use alloc::vec::Vec;

use crate::attention::{AttentionError, HeadConfig, HeadParams};
use crate::features::FeatureBag;
use crate::loss::sigmoid;
use crate::NUM_FACTORS;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error(transparent)]
    Attention(#[from] AttentionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn npv(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.ppv()?, self.sensitivity()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    Ok(())
}

/// Counts with "positive" meaning `score > threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion, MetricError> {
    check_lengths(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s > threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Indices sorted by descending score; equal scores keep input order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Mann–Whitney AUC: `(concordant + ½ tied) / (P · N)` over all
/// positive/negative pairs. `None` when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>, MetricError> {
    check_lengths(scores, labels)?;
    let order = descending_order(scores);
    let positives = labels.iter().filter(|&&y| y).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }
    // Walk ascending so every positive sees the negatives strictly below it.
    let mut negatives_below = 0u64;
    let mut concordant = 0u64;
    let mut tied = 0u64;
    let mut i = order.len();
    while i > 0 {
        let score = scores[order[i - 1]];
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j > 0 && scores[order[j - 1]] == score {
            if labels[order[j - 1]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j -= 1;
        }
        concordant += pos * negatives_below;
        tied += pos * neg;
        negatives_below += neg;
        i = j;
    }
    Ok(Some((concordant as f64 + 0.5 * tied as f64) / (positives * negatives) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>=` this value are called positive; the first point uses +∞.
    pub threshold: f64,
}

/// ROC curve with one point per distinct score, from (0, 0) to (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Option<Vec<RocPoint>>, MetricError> {
    check_lengths(scores, labels)?;
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }
    let order = descending_order(scores);
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold: score,
        });
    }
    Ok(Some(points))
}

/// Trapezoidal area under a ROC curve.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5).sum()
}

/// Non-interpolated AP: mean over positives of precision at their rank.
/// Ties are ranked by input order. `None` without positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<Option<f64>, MetricError> {
    check_lengths(scores, labels)?;
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 {
        return Ok(None);
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &idx) in descending_order(scores).iter().enumerate() {
        if labels[idx] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(Some(total / positives as f64))
}

/// Metrics for one factor. Undefined ratios are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorReport {
    pub confusion: Confusion,
    pub ap: Option<f64>,
    pub auc: Option<f64>,
    pub acc: Option<f64>,
    pub spec: Option<f64>,
    pub sen: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
}

impl FactorReport {
    pub fn compute(probs: &[f64], labels: &[bool], threshold: f64) -> Result<Self, MetricError> {
        let confusion = confusion(probs, labels, threshold)?;
        Ok(Self {
            confusion,
            ap: average_precision(probs, labels)?,
            auc: roc_auc(probs, labels)?,
            acc: confusion.accuracy(),
            spec: confusion.specificity(),
            sen: confusion.sensitivity(),
            ppv: confusion.ppv(),
            npv: confusion.npv(),
            f1: confusion.f1(),
        })
    }
}

/// Per-factor and macro metrics over a set of bags.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub threshold: f64,
    pub factors: Vec<FactorReport>,
    /// Mean AP over factors where it is defined.
    pub map: Option<f64>,
    pub auc: Option<f64>,
    pub acc: Option<f64>,
    pub spec: Option<f64>,
    pub sen: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
}

/// Unweighted mean of the defined values.
pub fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values.flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl EvalReport {
    /// Builds the report from per-bag probabilities `probs[bag][factor]`.
    pub fn from_probabilities(probs: &[[f64; NUM_FACTORS]], labels: &[[bool; NUM_FACTORS]], threshold: f64) -> Result<Self, MetricError> {
        if probs.len() != labels.len() {
            return Err(MetricError::LengthMismatch { scores: probs.len(), labels: labels.len() });
        }
        let mut factors = Vec::with_capacity(NUM_FACTORS);
        for k in 0..NUM_FACTORS {
            let p: Vec<f64> = probs.iter().map(|r| r[k]).collect();
            let y: Vec<bool> = labels.iter().map(|r| r[k]).collect();
            factors.push(FactorReport::compute(&p, &y, threshold)?);
        }
        let macro_of = |f: fn(&FactorReport) -> Option<f64>| mean_defined(factors.iter().map(f));
        Ok(Self {
            threshold,
            map: macro_of(|f| f.ap),
            auc: macro_of(|f| f.auc),
            acc: macro_of(|f| f.acc),
            spec: macro_of(|f| f.spec),
            sen: macro_of(|f| f.sen),
            ppv: macro_of(|f| f.ppv),
            npv: macro_of(|f| f.npv),
            f1: macro_of(|f| f.f1),
            factors,
        })
    }
}

/// Per-bag factor probabilities from an eval-mode forward pass.
pub fn predict(head: &HeadConfig, params: &HeadParams, bags: &[FeatureBag]) -> Result<Vec<[f64; NUM_FACTORS]>, MetricError> {
    bags.iter()
        .map(|bag| {
            let f = head.forward(bag.instances(), params, None)?;
            let mut out = [0.0; NUM_FACTORS];
            for (o, z) in out.iter_mut().zip(&f.logits) {
                *o = sigmoid(*z);
            }
            Ok(out)
        })
        .collect()
}

/// Forward every bag in eval mode and score the predictions.
pub fn evaluate(head: &HeadConfig, params: &HeadParams, bags: &[FeatureBag], threshold: f64) -> Result<EvalReport, MetricError> {
    let probs = predict(head, params, bags)?;
    let labels: Vec<[bool; NUM_FACTORS]> = bags.iter().map(|b| b.labels().0.map(|v| v != 0)).collect();
    EvalReport::from_probabilities(&probs, &labels, threshold)
}
