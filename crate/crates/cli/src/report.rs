//! Machine-readable training reports.

use std::path::Path;

use crossview_core::pipeline::{CvReport, LossRecord, MetricsReport, RocPoint, CLASS_NAMES};
use serde::{Deserialize, Serialize};

use crate::atomic::{write_atomic, write_csv};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_evaluated: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_sensitivity: f64,
    pub macro_precision: f64,
    pub auc: Option<f64>,
    pub per_class: Vec<ClassSummary>,
    pub confusion: Vec<Vec<u64>>,
}

impl From<&MetricsReport> for Summary {
    fn from(m: &MetricsReport) -> Self {
        Self {
            n_evaluated: m.n_evaluated,
            accuracy: m.accuracy,
            macro_f1: m.macro_f1(),
            macro_sensitivity: m.macro_sensitivity(),
            macro_precision: m.macro_precision(),
            auc: m.auc,
            per_class: m
                .per_class
                .iter()
                .enumerate()
                .map(|(c, pc)| ClassSummary {
                    class: class_name(c),
                    precision: pc.precision,
                    sensitivity: pc.sensitivity,
                    f1: pc.f1,
                    undefined: pc.undefined,
                })
                .collect(),
            confusion: m.confusion.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    #[serde(flatten)]
    pub metrics: Summary,
    pub final_loss: Option<LossRecord>,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub seed: u64,
    pub n_patients: usize,
    pub stratified: bool,
    pub pooled: Summary,
    pub fold_auc_mean: Option<f64>,
    pub fold_auc_std: Option<f64>,
    pub fold_accuracy_mean: f64,
    pub fold_accuracy_std: f64,
    pub folds: Vec<FoldSummary>,
}

impl MetricsFile {
    pub fn new(report: &CvReport, seed: u64, n_patients: usize) -> Self {
        Self {
            seed,
            n_patients,
            stratified: report.stratified,
            pooled: Summary::from(&report.pooled),
            fold_auc_mean: report.fold_auc_mean,
            fold_auc_std: report.fold_auc_std,
            fold_accuracy_mean: report.fold_accuracy_mean,
            fold_accuracy_std: report.fold_accuracy_std,
            folds: report
                .folds
                .iter()
                .map(|f| FoldSummary {
                    fold: f.fold,
                    metrics: Summary::from(&f.metrics),
                    final_loss: f.metrics.loss_history.last().copied(),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::format(path, e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

pub fn class_name(c: usize) -> String {
    CLASS_NAMES.get(c).map_or_else(|| format!("class_{c}"), |s| s.to_string())
}

pub fn fmt(v: f64) -> String {
    v.to_string()
}

pub fn write_loss_csv(path: &Path, history: &[LossRecord]) -> Result<()> {
    let header = ["epoch", "l_m", "l_f", "l_pos", "l_neg", "l_diag", "total"].map(String::from);
    let rows = history.iter().map(|r| {
        vec![
            r.epoch.to_string(),
            fmt(r.l_m),
            fmt(r.l_f),
            fmt(r.l_pos),
            fmt(r.l_neg),
            fmt(r.l_diag),
            fmt(r.total),
        ]
    });
    write_csv(path, &header, rows)
}

pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    let header = ["fpr", "tpr", "threshold"].map(String::from);
    let rows = points.iter().map(|p| vec![fmt(p.fpr), fmt(p.tpr), fmt(p.threshold)]);
    write_csv(path, &header, rows)
}

pub fn write_series_csv(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let header = ["epoch".to_string(), name.to_string()];
    let rows = values.iter().enumerate().map(|(e, v)| vec![e.to_string(), fmt(*v)]);
    write_csv(path, &header, rows)
}
