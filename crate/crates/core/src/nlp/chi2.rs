//! Chi-squared feature ranking over nonnegative feature mass.
//!
//! For feature `f` and class `c`, the observed mass is `O_c = sum of x[f]
//! over documents of class c` and the expected mass is `E_c = share_c *
//! sum_c O_c` where `share_c` is the fraction of documents in class `c`.
//! The score is `sum_c (O_c - E_c)^2 / E_c`, skipping classes with `E_c = 0`.

use thiserror::Error;

use super::label::Label;
use super::tfidf::SparseVector;

pub const DEFAULT_K: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Chi2Error {
    #[error("chi2 undefined for one class")]
    SingleClass,
    #[error("need at least 2 documents, got {0}")]
    TooFewDocuments(usize),
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("feature {index} has negative or non-finite value {value}")]
    InvalidValue { index: usize, value: f64 },
    #[error("feature index {index} outside a {n_features}-feature space")]
    IndexOutOfRange { index: usize, n_features: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chi2Selector {
    /// Number of selected features (the requested k capped at the vocabulary size).
    pub k: usize,
    /// Selected original feature indices, ascending.
    pub selected: Vec<usize>,
    /// Score of every original feature.
    pub scores: Vec<f64>,
}

/// Per-feature chi-squared scores.
pub fn chi2_scores(x: &[SparseVector], y: &[Label], n_features: usize) -> Result<Vec<f64>, Chi2Error> {
    if x.len() != y.len() {
        return Err(Chi2Error::LengthMismatch {
            vectors: x.len(),
            labels: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Chi2Error::TooFewDocuments(x.len()));
    }
    let mut class_docs = [0usize; 2];
    for label in y {
        class_docs[label.index()] += 1;
    }
    if class_docs.contains(&0) {
        return Err(Chi2Error::SingleClass);
    }

    let mut observed = vec![[0.0f64; 2]; n_features];
    for (v, label) in x.iter().zip(y) {
        for &(index, value) in v.entries() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Chi2Error::InvalidValue { index, value });
            }
            let slot = observed
                .get_mut(index)
                .ok_or(Chi2Error::IndexOutOfRange { index, n_features })?;
            slot[label.index()] += value;
        }
    }

    let total_docs = x.len() as f64;
    let share = class_docs.map(|n| n as f64 / total_docs);
    Ok(observed
        .iter()
        .map(|obs| {
            let mass = obs[0] + obs[1];
            (0..2)
                .map(|c| {
                    let expected = share[c] * mass;
                    if expected == 0.0 {
                        0.0
                    } else {
                        (obs[c] - expected).powi(2) / expected
                    }
                })
                .sum()
        })
        .collect())
}

/// Ranks features and keeps the top `k`, breaking score ties towards the
/// lower index. `k` is capped at `n_features`.
pub fn chi2_select(
    x: &[SparseVector],
    y: &[Label],
    n_features: usize,
    k: usize,
) -> Result<Chi2Selector, Chi2Error> {
    let scores = chi2_scores(x, y, n_features)?;
    let mut order: Vec<usize> = (0..n_features).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let k = k.min(n_features);
    let mut selected = order[..k].to_vec();
    selected.sort_unstable();
    Ok(Chi2Selector { k, selected, scores })
}

impl Chi2Selector {
    /// Dense vector over the selected features, in selection order.
    pub fn project(&self, v: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.selected.len()];
        for &(index, value) in v.entries() {
            if let Ok(pos) = self.selected.binary_search(&index) {
                out[pos] = value;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Benign, Ransom};

    fn dense(rows: &[&[f64]]) -> Vec<SparseVector> {
        rows.iter()
            .map(|r| SparseVector::from_pairs(r.iter().copied().enumerate()))
            .collect()
    }

    #[test]
    fn class_exclusive_feature_outranks_uniform_one() {
        // f0 only in ransom docs, f1 spread evenly
        let x = dense(&[&[1.0, 0.5], &[1.0, 0.5], &[0.0, 0.5], &[0.0, 0.5]]);
        let y = [Ransom, Ransom, Benign, Benign];
        let s = chi2_scores(&x, &y, 2).unwrap();
        // O = (0, 2), E = (1, 1): (0-1)^2/1 + (2-1)^2/1
        assert!((s[0] - 2.0).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        assert!(s[0] > s[1]);
    }

    #[test]
    fn proportional_mass_scores_zero() {
        // three benign docs and one ransom doc, mass 3:1
        let x = dense(&[&[1.0], &[1.0], &[1.0], &[1.0]]);
        let y = [Benign, Benign, Benign, Ransom];
        assert_eq!(chi2_scores(&x, &y, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn k_capped_at_vocabulary() {
        let x = dense(&[&[0.2, 0.0, 0.9], &[0.0, 0.7, 0.1]]);
        let sel = chi2_select(&x, &[Benign, Ransom], 3, 400).unwrap();
        assert_eq!(sel.k, 3);
        assert_eq!(sel.selected, vec![0, 1, 2]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let x = dense(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let sel = chi2_select(&x, &[Ransom, Benign], 3, 1).unwrap();
        assert_eq!(sel.scores[0], sel.scores[1]);
        assert_eq!(sel.selected, vec![0]);
    }

    #[test]
    fn errors() {
        let x = dense(&[&[1.0], &[1.0]]);
        assert_eq!(chi2_select(&x, &[Ransom, Ransom], 1, 1), Err(Chi2Error::SingleClass));
        assert!(matches!(chi2_select(&x[..1], &[Ransom], 1, 1), Err(Chi2Error::TooFewDocuments(1))));
        let neg = dense(&[&[-1.0], &[1.0]]);
        assert!(matches!(
            chi2_select(&neg, &[Ransom, Benign], 1, 1),
            Err(Chi2Error::InvalidValue { .. })
        ));
    }

    #[test]
    fn projection_follows_selection() {
        let sel = Chi2Selector {
            k: 2,
            selected: vec![1, 4],
            scores: vec![0.0; 5],
        };
        let v = SparseVector::from_pairs([(0, 0.3), (4, 0.6), (1, 0.1)]);
        assert_eq!(sel.project(&v), vec![0.1, 0.6]);
    }
}
