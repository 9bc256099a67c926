//! Classification metrics, ROC curves and AUC.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dataset::{argmax, POSITIVE_CLASS};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    /// Set when a metric had a zero denominator and was reported as 0.
    pub undefined: bool,
}

/// Per-epoch values of every loss component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub l_m: f64,
    pub l_f: f64,
    pub l_pos: f64,
    pub l_neg: f64,
    pub l_diag: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_evaluated: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub roc_points: Vec<RocPoint>,
    /// `None` unless the task is binary with both classes present.
    pub auc: Option<f64>,
    pub loss_history: Vec<LossRecord>,
}

impl MetricsReport {
    pub fn macro_f1(&self) -> f64 {
        mean(self.per_class.iter().map(|c| c.f1))
    }

    pub fn macro_sensitivity(&self) -> f64 {
        mean(self.per_class.iter().map(|c| c.sensitivity))
    }

    pub fn macro_precision(&self) -> f64 {
        mean(self.per_class.iter().map(|c| c.precision))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64;
    (m, libm::sqrt(v))
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Argmax predictions scored against `labels` (class indices).
pub fn evaluate(probabilities: &Tensor, labels: &[usize]) -> Result<MetricsReport> {
    let (n, c) = probabilities.dims2()?;
    if n != labels.len() {
        return Err(Error::Shape {
            op: "evaluate",
            lhs: probabilities.shape().to_vec(),
            rhs: vec![labels.len()],
        });
    }
    if n == 0 {
        return Err(Error::Dataset("nothing to evaluate".into()));
    }
    for i in 0..n {
        let s: f64 = probabilities.row(i).iter().sum();
        if libm::fabs(s - 1.0) > 1e-6 {
            return Err(Error::Contract(format!("probability row {i} sums to {s}")));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Label(format!("label {bad} out of range for {c} classes")));
    }

    let mut confusion = vec![vec![0u64; c]; c];
    for (i, &truth) in labels.iter().enumerate() {
        confusion[truth][argmax(probabilities.row(i))] += 1;
    }
    let correct: u64 = (0..c).map(|k| confusion[k][k]).sum();
    let per_class = (0..c)
        .map(|k| {
            let tp = confusion[k][k];
            let predicted: u64 = (0..c).map(|t| confusion[t][k]).sum();
            let actual: u64 = confusion[k].iter().sum();
            let (precision, p_undef) = ratio(tp, predicted);
            let (sensitivity, s_undef) = ratio(tp, actual);
            let (f1, f_undef) = if precision + sensitivity > 0.0 {
                (2.0 * precision * sensitivity / (precision + sensitivity), false)
            } else {
                (0.0, true)
            };
            ClassMetrics {
                precision,
                sensitivity,
                f1,
                undefined: p_undef || s_undef || f_undef,
            }
        })
        .collect();

    let (roc_points, auc) = if c == 2 {
        let scores: Vec<f64> = (0..n).map(|i| probabilities.at(i, POSITIVE_CLASS)).collect();
        let positive: Vec<bool> = labels.iter().map(|&l| l == POSITIVE_CLASS).collect();
        match roc_auc(&scores, &positive) {
            Ok((a, pts)) => (pts, Some(a)),
            Err(Error::UndefinedAuc(_)) => (Vec::new(), None),
            Err(e) => return Err(e),
        }
    } else {
        (Vec::new(), None)
    };

    Ok(MetricsReport {
        n_evaluated: n,
        accuracy: correct as f64 / n as f64,
        per_class,
        confusion,
        roc_points,
        auc,
        loss_history: Vec::new(),
    })
}

/// ROC curve over every distinct score (descending) and its trapezoidal
/// area. Tied scores form one step, so the area equals the Mann–Whitney
/// probability `P(pos > neg) + ½ P(tie)`.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<(f64, Vec<RocPoint>)> {
    if scores.len() != positive.len() {
        return Err(Error::Shape {
            op: "roc_auc",
            lhs: vec![scores.len()],
            rhs: vec![positive.len()],
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Dataset("ROC scores must be finite".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc(format!("{n_pos} positives and {n_neg} negatives")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let top = scores[order[0]];
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: top + 1.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if positive[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let prev = *points.last().expect("nonempty");
        let pt = RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: s,
        };
        area += (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr) / 2.0;
        points.push(pt);
    }
    Ok((area, points))
}
