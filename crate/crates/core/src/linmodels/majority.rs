use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};

/// Constant predictor of the most frequent training label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityBaseline {
    pub label: Label,
}

impl MajorityBaseline {
    /// Ties go to the lexicographically smallest label name.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::data("empty dataset"));
        }
        let mut counts = [0usize; 3];
        for ex in train {
            counts[ex.label.index()] += 1;
        }
        let mut candidates = Label::ALL;
        candidates.sort_by_key(|l| l.as_str());
        let label = candidates
            .into_iter()
            .fold(None::<Label>, |best, l| match best {
                Some(b) if counts[b.index()] >= counts[l.index()] => Some(b),
                _ => Some(l),
            })
            .expect("three candidates");
        Ok(Self { label })
    }

    pub fn predict(&self) -> Label {
        self.label
    }

    pub fn predict_all(&self, n: usize) -> Vec<Label> {
        vec![self.label; n]
    }
}
