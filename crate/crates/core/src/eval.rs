//! Confusion matrices and accuracy, with rejected samples held out.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ClassLabel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{preds} predictions, {labels} labels and {rejects} reject flags")]
    Length {
        preds: usize,
        labels: usize,
        rejects: usize,
    },
    #[error("every sample was rejected")]
    AllRejected,
}

/// Rows are true classes, columns assigned classes, both in `A, L, R, W`
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[usize; ClassLabel::COUNT]; ClassLabel::COUNT],
    pub n_rejected: usize,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[usize; ClassLabel::COUNT]; ClassLabel::COUNT]) -> Self {
        Self { counts, n_rejected: 0 }
    }

    pub fn get(&self, truth: ClassLabel, assigned: ClassLabel) -> usize {
        self.counts[truth.index()][assigned.index()]
    }

    pub fn trace(&self) -> usize {
        (0..ClassLabel::COUNT).map(|i| self.counts[i][i]).sum()
    }

    /// Non-rejected samples.
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Accuracy over non-rejected samples.
    pub fn accuracy(&self) -> Result<f64, EvalError> {
        match self.total() {
            0 => Err(EvalError::AllRejected),
            n => Ok(self.trace() as f64 / n as f64),
        }
    }

    /// Tab-separated table with a header row of class names.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("true\\assigned");
        for c in ClassLabel::ALL {
            let _ = write!(s, "\t{c}");
        }
        s.push('\n');
        for t in ClassLabel::ALL {
            s.push_str(t.as_str());
            for a in ClassLabel::ALL {
                let _ = write!(s, "\t{}", self.get(t, a));
            }
            s.push('\n');
        }
        s
    }
}

/// Tallies predictions against labels; samples with `rejects[i]` set are
/// counted in `n_rejected` only.
pub fn confusion(preds: &[ClassLabel], labels: &[ClassLabel], rejects: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != labels.len() || rejects.len() != labels.len() {
        return Err(EvalError::Length {
            preds: preds.len(),
            labels: labels.len(),
            rejects: rejects.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for ((p, l), &r) in preds.iter().zip(labels).zip(rejects) {
        if r {
            cm.n_rejected += 1;
        } else {
            cm.counts[l.index()][p.index()] += 1;
        }
    }
    Ok(cm)
}
