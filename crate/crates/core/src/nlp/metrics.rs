use std::fmt;

use serde::{Deserialize, Serialize};

use super::label::Label;

/// Binary classification metrics with `Ransom` as the positive class.
///
/// When a ratio's denominator is zero it is reported as 0 and the matching
/// `*_undefined` flag is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
    /// Per-fold accuracies when produced by cross-validation.
    pub cv_scores: Vec<f64>,
    pub cv_mean: Option<f64>,
    pub seed: u64,
}

impl Metrics {
    pub fn from_predictions(truth: &[Label], predicted: &[Label], seed: u64) -> Self {
        assert_eq!(truth.len(), predicted.len());
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Label::Ransom, Label::Ransom) => tp += 1,
                (Label::Benign, Label::Ransom) => fp += 1,
                (Label::Benign, Label::Benign) => tn += 1,
                (Label::Ransom, Label::Benign) => fn_ += 1,
            }
        }
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (accuracy, _) = ratio(tp + tn, truth.len());
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        let (f1, f1_undefined) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        Metrics {
            accuracy,
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
            precision_undefined,
            recall_undefined,
            f1_undefined,
            cv_scores: Vec::new(),
            cv_mean: None,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |undefined: bool| if undefined { " (undefined)" } else { "" };
        writeln!(f, "{:<24}{:>10}", "metric", "value")?;
        writeln!(f, "{:<24}{:>10.4}", "accuracy", self.accuracy)?;
        writeln!(f, "{:<24}{:>10.4}{}", "precision", self.precision, flag(self.precision_undefined))?;
        writeln!(f, "{:<24}{:>10.4}{}", "recall", self.recall, flag(self.recall_undefined))?;
        writeln!(f, "{:<24}{:>10.4}{}", "f1", self.f1, flag(self.f1_undefined))?;
        if let Some(mean) = self.cv_mean {
            writeln!(f, "{:<24}{:>10.4}", format!("cv mean (k={})", self.cv_scores.len()), mean)?;
        }
        write!(
            f,
            "confusion: tp={} fp={} tn={} fn={} (seed {})",
            self.tp, self.fp, self.tn, self.fn_, self.seed
        )
    }
}
