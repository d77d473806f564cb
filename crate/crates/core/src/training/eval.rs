use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::dataprep::Example;
use crate::labels::{CLASS_NAMES, NUM_CLASSES};
use crate::nncore::{argmax, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when nothing was predicted as this class; `precision` is then 0.
    pub precision_undefined: bool,
}

/// Classification report: one row per class plus averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub support: usize,
    /// `confusion[truth][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EvalReport {
    /// Builds the report from a square confusion matrix.
    pub fn from_confusion(confusion: Vec<Vec<usize>>, class_names: &[&str]) -> Self {
        let k = confusion.len();
        assert!(confusion.iter().all(|r| r.len() == k) && class_names.len() == k);
        let total: usize = confusion.iter().flatten().sum();
        let mut classes = Vec::with_capacity(k);
        for c in 0..k {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support).unwrap_or(0.0);
            let p = precision.unwrap_or(0.0);
            let f1 = if p + recall > 0.0 {
                2.0 * p * recall / (p + recall)
            } else {
                0.0
            };
            classes.push(ClassMetrics {
                class: class_names[c].to_string(),
                precision: p,
                recall,
                f1,
                support,
                precision_undefined: precision.is_none(),
            });
        }
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        let avg = |weight: &dyn Fn(&ClassMetrics) -> f64| {
            let norm: f64 = classes.iter().map(weight).sum();
            let mean = |m: &dyn Fn(&ClassMetrics) -> f64| {
                if norm == 0.0 {
                    0.0
                } else {
                    classes.iter().map(|c| weight(c) * m(c)).sum::<f64>() / norm
                }
            };
            Averages {
                precision: mean(&|c| c.precision),
                recall: mean(&|c| c.recall),
                f1: mean(&|c| c.f1),
            }
        };
        let macro_avg = avg(&|_| 1.0);
        let weighted_avg = avg(&|c| c.support as f64);
        Self {
            accuracy: ratio(correct, total).unwrap_or(0.0),
            classes,
            macro_avg,
            weighted_avg,
            support: total,
            confusion,
        }
    }

    pub fn recalls(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.recall).collect()
    }
}

/// Argmax predictions of `model` over `test`, scored per class.
pub fn evaluate(model: &Model, test: &[Example]) -> Result<EvalReport, TrainError> {
    if test.is_empty() {
        return Err(TrainError::EmptyTestSet);
    }
    let mut confusion = vec![vec![0usize; NUM_CLASSES]; NUM_CLASSES];
    for ex in test {
        let predicted = argmax(&model.logits(&ex.input)?);
        confusion[ex.label][predicted] += 1;
    }
    Ok(EvalReport::from_confusion(confusion, &CLASS_NAMES))
}
