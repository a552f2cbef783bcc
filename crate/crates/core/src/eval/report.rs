use serde::{Deserialize, Serialize};

use crate::data::Condition;
use crate::stats::{mean, sample_std};

/// Experiment context attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub condition: Option<Condition>,
    pub channels: Vec<String>,
    pub spectral_block: bool,
    pub k: usize,
    pub seed: u64,
    pub epochs: usize,
    pub n_epochs: usize,
    pub shuffled_labels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Held-out accuracy per fold in percent, indexed by fold id.
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation across folds.
    pub std_accuracy: f64,
    /// Counts, rows are true subjects and columns predictions.
    pub confusion: Vec<Vec<u64>>,
    /// 100 / number of subjects.
    pub chance: f64,
    pub meta: ReportMeta,
}

impl EvalReport {
    /// Builds a report from per-fold `(truth, prediction)` pairs.
    pub fn from_folds(fold_results: &[Vec<(usize, usize)>], n_classes: usize, meta: ReportMeta) -> Self {
        let mut confusion = vec![vec![0u64; n_classes]; n_classes];
        let mut fold_accuracy = Vec::with_capacity(fold_results.len());
        for fold in fold_results {
            let mut correct = 0;
            for &(truth, pred) in fold {
                confusion[truth][pred] += 1;
                if truth == pred {
                    correct += 1;
                }
            }
            let acc = if fold.is_empty() {
                0.0
            } else {
                100.0 * correct as f64 / fold.len() as f64
            };
            fold_accuracy.push(acc);
        }
        EvalReport {
            mean_accuracy: mean(&fold_accuracy),
            std_accuracy: if fold_accuracy.len() > 1 {
                sample_std(&fold_accuracy)
            } else {
                0.0
            },
            fold_accuracy,
            confusion,
            chance: 100.0 / n_classes as f64,
            meta,
        }
    }

    /// Rows scaled to sum to one; empty rows stay zero.
    pub fn normalized_confusion(&self) -> Vec<Vec<f64>> {
        self.confusion
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }

    /// Pooled accuracy in percent: confusion trace over total.
    pub fn pooled_accuracy(&self) -> f64 {
        let total: u64 = self.confusion.iter().flatten().sum();
        let trace: u64 = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        if total == 0 {
            0.0
        } else {
            100.0 * trace as f64 / total as f64
        }
    }
}
