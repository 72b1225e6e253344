use serde::Serialize;

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Confusion matrix plus derived scores. Rows are gold classes, columns
/// predicted classes, both in `classes` order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub classes: Vec<Label>,
    pub confusion: Vec<Vec<usize>>,
    pub micro_f1: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Cells where precision or recall had a zero denominator and were set to 0.
    pub undefined: Vec<String>,
}

impl Metrics {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    fn position(&self, label: Label) -> Option<usize> {
        self.classes.iter().position(|&c| c == label)
    }

    pub fn precision_of(&self, label: Label) -> Option<f64> {
        self.position(label).map(|i| self.precision[i])
    }

    pub fn recall_of(&self, label: Label) -> Option<f64> {
        self.position(label).map(|i| self.recall[i])
    }

    /// Builds metrics straight from a gold-by-predicted count matrix.
    pub fn from_confusion(classes: &[Label], confusion: Vec<Vec<usize>>) -> Result<Self> {
        let k = classes.len();
        if confusion.len() != k || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::invalid(
                "confusion matrix shape does not match class list",
            ));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::invalid("empty confusion matrix"));
        }
        let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
        let mut precision = vec![0.0; k];
        let mut recall = vec![0.0; k];
        let mut undefined = Vec::new();
        for i in 0..k {
            let predicted: usize = (0..k).map(|g| confusion[g][i]).sum();
            let gold: usize = confusion[i].iter().sum();
            if predicted == 0 {
                undefined.push(format!("precision[{}]", classes[i]));
            } else {
                precision[i] = confusion[i][i] as f64 / predicted as f64;
            }
            if gold == 0 {
                undefined.push(format!("recall[{}]", classes[i]));
            } else {
                recall[i] = confusion[i][i] as f64 / gold as f64;
            }
        }
        Ok(Self {
            classes: classes.to_vec(),
            micro_f1: trace as f64 / total as f64,
            confusion,
            precision,
            recall,
            undefined,
        })
    }
}

/// Scores single-label predictions. Micro-F1 equals accuracy here.
pub fn evaluate(predictions: &[Label], gold: &[Label], classes: &[Label]) -> Result<Metrics> {
    if predictions.len() != gold.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let k = classes.len();
    let index = |l: Label| {
        classes
            .iter()
            .position(|&c| c == l)
            .ok_or_else(|| Error::invalid(format!("label {l} not in class list")))
    };
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &g) in predictions.iter().zip(gold) {
        confusion[index(g)?][index(p)?] += 1;
    }
    Metrics::from_confusion(classes, confusion)
}
