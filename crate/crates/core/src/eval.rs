use crate::dataset::{FeatureView, Label};
use crate::error::{Error, Result};
use crate::network::NetworkState;

/// Accuracy overall and per class on a labelled view.
///
/// A class with no instances reports accuracy `1.0` and is marked undefined
/// through [`EvalReport::positive_defined`] / [`EvalReport::negative_defined`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub total: u64,
    pub correct_count: u64,
    pub accuracy: f64,
    pub acc_positive: f64,
    pub acc_negative: f64,
    pub positives: u64,
    pub negatives: u64,
    pub mean_loss: f64,
}

impl EvalReport {
    /// Scores raw predictions against labels; class is `+1` iff prediction `>= 0`.
    pub fn from_predictions(predictions: &[f64], labels: &[Label]) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if predictions.len() != labels.len() {
            return Err(Error::Dataset("prediction and label counts differ".into()));
        }
        let (mut pos, mut neg, mut pos_ok, mut neg_ok) = (0u64, 0u64, 0u64, 0u64);
        let mut loss = 0.0;
        for (&p, &y) in predictions.iter().zip(labels) {
            let hit = Label::from_prediction(p) == y;
            match y {
                Label::Positive => {
                    pos += 1;
                    pos_ok += hit as u64;
                }
                Label::Negative => {
                    neg += 1;
                    neg_ok += hit as u64;
                }
            }
            let err = p - y.value();
            loss += 0.5 * err * err;
        }
        let ratio = |ok: u64, n: u64| if n == 0 { 1.0 } else { ok as f64 / n as f64 };
        let total = pos + neg;
        Ok(Self {
            total,
            correct_count: pos_ok + neg_ok,
            accuracy: (pos_ok + neg_ok) as f64 / total as f64,
            acc_positive: ratio(pos_ok, pos),
            acc_negative: ratio(neg_ok, neg),
            positives: pos,
            negatives: neg,
            mean_loss: loss / total as f64,
        })
    }

    pub fn positive_defined(&self) -> bool {
        self.positives > 0
    }

    pub fn negative_defined(&self) -> bool {
        self.negatives > 0
    }
}

pub fn evaluate(state: &NetworkState, view: &FeatureView) -> Result<EvalReport> {
    if view.is_empty() {
        return Err(Error::EmptyDataset);
    }
    EvalReport::from_predictions(&state.predict(view)?, view.labels())
}
