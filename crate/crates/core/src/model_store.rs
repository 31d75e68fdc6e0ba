//! Persistence for trained note classifiers.
//!
//! A bundle is one pretty-printed JSON document (`.rgmodel`) with a fixed
//! top-level field order:
//!
//! ```text
//! format_version, preprocessing_tag, vocabulary, idf, doc_count,
//! selected_features, chi2_scores, class_labels, class_log_prior,
//! feature_log_prob, alpha, training_fingerprint
//! ```
//!
//! `vocabulary` is an array of `[token, document_frequency]` pairs in feature
//! index order. Floats are written as shortest round-trip decimals, so a
//! save/load cycle is bit-exact and the same bundle always serializes to the
//! same bytes.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlp::chi2::Chi2Selector;
use crate::nlp::label::Label;
use crate::nlp::naive_bayes::{NbModel, Prediction};
use crate::nlp::preprocess::{preprocess, PREPROCESSING_TAG};
use crate::nlp::tfidf::{smooth_idf, TfIdfModel};

pub const FORMAT_VERSION: u32 = 1;
pub const BUNDLE_EXTENSION: &str = "rgmodel";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("invariant violation in {field}: {reason}")]
    Invariant { field: &'static str, reason: String },
    #[error("preprocessing tag {found:?} does not match this build ({expected:?})")]
    PreprocessingMismatch { found: String, expected: &'static str },
    #[error("malformed bundle: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bundle i/o: {0}")]
    Io(#[from] io::Error),
}

/// Everything needed to classify text: vectorizer, selector and classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub preprocessing_tag: String,
    pub tfidf: TfIdfModel,
    pub selector: Chi2Selector,
    pub nb: NbModel,
    /// Hex SHA-256 over training document ids and configuration. Informative only.
    pub training_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    format_version: u32,
    preprocessing_tag: String,
    vocabulary: Vec<(String, usize)>,
    idf: Vec<f64>,
    doc_count: usize,
    selected_features: Vec<usize>,
    chi2_scores: Vec<f64>,
    class_labels: Vec<Label>,
    class_log_prior: Vec<f64>,
    feature_log_prob: Vec<Vec<f64>>,
    alpha: f64,
    training_fingerprint: String,
}

fn invariant(field: &'static str, reason: impl Into<String>) -> BundleError {
    BundleError::Invariant {
        field,
        reason: reason.into(),
    }
}

fn all_finite(field: &'static str, values: &[f64]) -> Result<(), BundleError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invariant(field, format!("non-finite value at {i}"))),
        None => Ok(()),
    }
}

impl ModelBundle {
    pub fn new(
        tfidf: TfIdfModel,
        selector: Chi2Selector,
        nb: NbModel,
        training_fingerprint: String,
    ) -> Result<Self, BundleError> {
        let bundle = ModelBundle {
            format_version: FORMAT_VERSION,
            preprocessing_tag: PREPROCESSING_TAG.to_owned(),
            tfidf,
            selector,
            nb,
            training_fingerprint,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        if self.format_version != FORMAT_VERSION {
            return Err(BundleError::UnsupportedVersion(self.format_version));
        }
        if self.preprocessing_tag != PREPROCESSING_TAG {
            return Err(BundleError::PreprocessingMismatch {
                found: self.preprocessing_tag.clone(),
                expected: PREPROCESSING_TAG,
            });
        }
        let vocab = self.tfidf.vocabulary_size();
        if self.tfidf.tokens().windows(2).any(|w| w[0] >= w[1]) {
            return Err(invariant("vocabulary", "tokens must be unique and sorted"));
        }
        if let Some(df) = self.tfidf.doc_freq().iter().find(|&&df| df == 0 || df > self.tfidf.doc_count()) {
            return Err(invariant("vocabulary", format!("document frequency {df} outside 1..=doc_count")));
        }
        all_finite("idf", self.tfidf.idf())?;
        let sel = &self.selector;
        if sel.scores.len() != vocab {
            return Err(invariant("chi2_scores", format!("{} scores for {vocab} features", sel.scores.len())));
        }
        all_finite("chi2_scores", &sel.scores)?;
        if let Some(&i) = sel.selected.iter().find(|&&i| i >= vocab) {
            return Err(invariant("selected_features", format!("index {i} >= vocabulary size {vocab}")));
        }
        if sel.selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invariant("selected_features", "indices must be strictly ascending"));
        }
        if sel.k != sel.selected.len() {
            return Err(invariant("selected_features", "k disagrees with selection length"));
        }
        all_finite("class_log_prior", &self.nb.class_log_prior)?;
        for row in &self.nb.feature_log_prob {
            if row.len() != sel.selected.len() {
                return Err(invariant(
                    "feature_log_prob",
                    format!("{} columns for {} selected features", row.len(), sel.selected.len()),
                ));
            }
            all_finite("feature_log_prob", row)?;
        }
        if !(self.nb.alpha.is_finite() && self.nb.alpha > 0.0) {
            return Err(invariant("alpha", "must be positive"));
        }
        Ok(())
    }

    /// Classifies already-preprocessed tokens.
    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Prediction {
        let v = self.tfidf.transform(tokens);
        self.nb.predict(&self.selector.project(&v))
    }

    pub fn predict_text(&self, text: &str) -> Prediction {
        self.predict_tokens(&preprocess(text))
    }

    pub fn to_json(&self) -> Result<String, BundleError> {
        self.validate()?;
        let file = BundleFile {
            format_version: self.format_version,
            preprocessing_tag: self.preprocessing_tag.clone(),
            vocabulary: self
                .tfidf
                .tokens()
                .iter()
                .cloned()
                .zip(self.tfidf.doc_freq().iter().copied())
                .collect(),
            idf: self.tfidf.idf().to_vec(),
            doc_count: self.tfidf.doc_count(),
            selected_features: self.selector.selected.clone(),
            chi2_scores: self.selector.scores.clone(),
            class_labels: Label::ALL.to_vec(),
            class_log_prior: self.nb.class_log_prior.to_vec(),
            feature_log_prob: self.nb.feature_log_prob.to_vec(),
            alpha: self.nb.alpha,
            training_fingerprint: self.training_fingerprint.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        // Check the version before the full schema so old or future files
        // get a clear message.
        #[derive(Deserialize)]
        struct VersionProbe {
            format_version: u32,
        }
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(BundleError::UnsupportedVersion(probe.format_version));
        }
        let file: BundleFile = serde_json::from_str(text)?;

        if file.class_labels != Label::ALL {
            return Err(invariant("class_labels", "expected [\"benign\", \"ransom\"]"));
        }
        if file.idf.len() != file.vocabulary.len() {
            return Err(invariant("idf", "length differs from vocabulary"));
        }
        for (i, ((_, df), idf)) in file.vocabulary.iter().zip(&file.idf).enumerate() {
            if smooth_idf(file.doc_count, *df).to_bits() != idf.to_bits() {
                return Err(invariant("idf", format!("entry {i} disagrees with its document frequency")));
            }
        }
        let [benign_prior, ransom_prior] = file.class_log_prior[..] else {
            return Err(invariant("class_log_prior", "expected 2 classes"));
        };
        let Ok([benign_lp, ransom_lp]) = <[Vec<f64>; 2]>::try_from(file.feature_log_prob) else {
            return Err(invariant("feature_log_prob", "expected 2 classes"));
        };
        let (tokens, doc_freq) = file.vocabulary.into_iter().unzip();
        let bundle = ModelBundle {
            format_version: file.format_version,
            preprocessing_tag: file.preprocessing_tag,
            tfidf: TfIdfModel::from_parts(tokens, file.doc_count, doc_freq),
            selector: Chi2Selector {
                k: file.selected_features.len(),
                selected: file.selected_features,
                scores: file.chi2_scores,
            },
            nb: NbModel {
                class_log_prior: [benign_prior, ransom_prior],
                feature_log_prob: [benign_lp, ransom_lp],
                alpha: file.alpha,
            },
            training_fingerprint: file.training_fingerprint,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<(), BundleError> {
    let text = bundle.to_json()?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle, BundleError> {
    ModelBundle::from_json(&fs::read_to_string(path)?)
}
