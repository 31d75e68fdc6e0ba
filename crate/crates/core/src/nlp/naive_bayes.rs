//! Two-class multinomial naive Bayes with additive smoothing.
//!
//! Feature values may be fractional (TF-IDF weights); each acts as a
//! fractional count. For class `c` and feature `f`:
//!
//! ```text
//! log P(c)     = ln(docs_c / docs)
//! log P(f | c) = ln((mass_cf + alpha) / (mass_c + alpha * F))
//! ```

use thiserror::Error;

use super::label::Label;

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NbError {
    #[error("naive Bayes needs both classes in the training data")]
    SingleClass,
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    Dimension { row: usize, got: usize, expected: usize },
    #[error("row {row} has a negative or non-finite feature value")]
    InvalidValue { row: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    /// Indexed by [`Label::index`].
    pub class_log_prior: [f64; 2],
    /// `feature_log_prob[class][feature]`.
    pub feature_log_prob: [Vec<f64>; 2],
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Normalized log posterior per class, indexed by [`Label::index`].
    pub log_posterior: [f64; 2],
}

impl Prediction {
    /// `ln P(ransom | x) - ln P(benign | x)`.
    pub fn margin(&self) -> f64 {
        self.log_posterior[Label::Ransom.index()] - self.log_posterior[Label::Benign.index()]
    }
}

pub fn fit_mnb(x: &[Vec<f64>], y: &[Label], alpha: f64) -> Result<NbModel, NbError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(NbError::InvalidAlpha(alpha));
    }
    if x.len() != y.len() {
        return Err(NbError::LengthMismatch {
            vectors: x.len(),
            labels: y.len(),
        });
    }
    let n_features = x.first().map_or(0, Vec::len);
    let mut docs = [0usize; 2];
    let mut mass = [vec![0.0; n_features], vec![0.0; n_features]];
    for (row, (v, label)) in x.iter().zip(y).enumerate() {
        if v.len() != n_features {
            return Err(NbError::Dimension {
                row,
                got: v.len(),
                expected: n_features,
            });
        }
        if v.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(NbError::InvalidValue { row });
        }
        let c = label.index();
        docs[c] += 1;
        for (acc, w) in mass[c].iter_mut().zip(v) {
            *acc += w;
        }
    }
    if docs.contains(&0) {
        return Err(NbError::SingleClass);
    }

    let total = (docs[0] + docs[1]) as f64;
    let class_log_prior = docs.map(|n| (n as f64 / total).ln());
    let feature_log_prob = mass.map(|per_feature| {
        let denom = per_feature.iter().sum::<f64>() + alpha * n_features as f64;
        per_feature
            .iter()
            .map(|m| ((m + alpha) / denom).ln())
            .collect()
    });
    Ok(NbModel {
        class_log_prior,
        feature_log_prob,
        alpha,
    })
}

impl NbModel {
    pub fn n_features(&self) -> usize {
        self.feature_log_prob[0].len()
    }

    /// Unnormalized joint log likelihood `log P(c) + sum_f x_f log P(f|c)`.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> [f64; 2] {
        [0, 1].map(|c| {
            self.class_log_prior[c]
                + x.iter()
                    .zip(&self.feature_log_prob[c])
                    .map(|(w, lp)| w * lp)
                    .sum::<f64>()
        })
    }

    /// Most probable class; exact ties resolve to `Benign`.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let jll = self.joint_log_likelihood(x);
        let max = jll[0].max(jll[1]);
        let log_norm = max + ((jll[0] - max).exp() + (jll[1] - max).exp()).ln();
        let label = if jll[1] > jll[0] { Label::Ransom } else { Label::Benign };
        Prediction {
            label,
            log_posterior: jll.map(|j| j - log_norm),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Benign, Ransom};

    #[test]
    fn balanced_priors() {
        let m = fit_mnb(&[vec![1.0], vec![2.0]], &[Benign, Ransom], 1.0).unwrap();
        assert_eq!(m.class_log_prior, [0.5f64.ln(), 0.5f64.ln()]);
    }

    #[test]
    fn hand_computed_likelihoods() {
        // ransom mass (3, 1), benign mass (0, 2), alpha 1, F = 2
        let m = fit_mnb(&[vec![3.0, 1.0], vec![0.0, 2.0]], &[Ransom, Benign], 1.0).unwrap();
        let r = &m.feature_log_prob[Ransom.index()];
        assert!((r[0] - (4.0f64 / 6.0).ln()).abs() < 1e-12);
        assert!((r[1] - (2.0f64 / 6.0).ln()).abs() < 1e-12);
        let b = &m.feature_log_prob[Benign.index()];
        assert!((b[0] - (1.0f64 / 4.0).ln()).abs() < 1e-12);
        assert!((b[1] - (3.0f64 / 4.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn all_zero_mass_is_uniform() {
        let m = fit_mnb(&[vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]], &[Benign, Ransom], 1.0).unwrap();
        for lp in &m.feature_log_prob[Benign.index()] {
            assert!((lp + 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn likelihoods_normalize() {
        let x = vec![vec![0.3, 0.0, 0.7], vec![0.1, 0.9, 0.2], vec![0.0, 0.5, 0.5]];
        let m = fit_mnb(&x, &[Benign, Ransom, Ransom], 0.5).unwrap();
        for row in &m.feature_log_prob {
            let s: f64 = row.iter().map(|lp| lp.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let p: f64 = m.class_log_prior.iter().map(|lp| lp.exp()).sum();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_vector_follows_priors() {
        let m = fit_mnb(&[vec![1.0], vec![1.0]], &[Benign, Ransom], 1.0).unwrap();
        assert_eq!(m.predict(&[0.0]).label, Benign);
        let m = fit_mnb(&[vec![1.0], vec![1.0], vec![1.0]], &[Benign, Ransom, Ransom], 1.0).unwrap();
        assert_eq!(m.predict(&[0.0]).label, Ransom);
    }

    #[test]
    fn ransom_heavy_feature_wins() {
        let x = vec![vec![5.0, 0.0], vec![0.0, 5.0]];
        let m = fit_mnb(&x, &[Ransom, Benign], 1.0).unwrap();
        let p = m.predict(&[1.0, 0.0]);
        assert_eq!(p.label, Ransom);
        assert!(p.margin() > 0.0);
        let total: f64 = p.log_posterior.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_mnb(&[vec![1.0]], &[Ransom], 1.0), Err(NbError::SingleClass));
        assert_eq!(
            fit_mnb(&[vec![1.0], vec![1.0]], &[Ransom, Benign], 0.0),
            Err(NbError::InvalidAlpha(0.0))
        );
        assert!(matches!(
            fit_mnb(&[vec![1.0], vec![1.0, 2.0]], &[Ransom, Benign], 1.0),
            Err(NbError::Dimension { row: 1, .. })
        ));
    }
}
