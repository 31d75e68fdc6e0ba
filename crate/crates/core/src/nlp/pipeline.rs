//! Training and evaluation of the note classifier: stratified hold-out split,
//! TF-IDF, chi-squared selection and multinomial naive Bayes, all fitted on
//! the training portion only.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chi2::{chi2_select, Chi2Error, DEFAULT_K};
use super::label::Label;
use super::metrics::Metrics;
use super::naive_bayes::{fit_mnb, NbError, DEFAULT_ALPHA};
use super::preprocess::{preprocess, PREPROCESSING_TAG};
use super::tfidf::{TfIdfError, TfIdfModel};
use crate::hashset::Sha256Digest;
use crate::model_store::{BundleError, ModelBundle};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.7;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl Document {
    pub fn labeled(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            label: Some(label),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub train_ratio: f64,
    pub seed: u64,
    pub k: usize,
    pub alpha: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train_ratio: DEFAULT_TRAIN_RATIO,
            seed: DEFAULT_SEED,
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("class {label} has {count} documents; at least {needed} required")]
    TooFewDocuments { label: Label, count: usize, needed: usize },
    #[error("document {0} has no label")]
    Unlabeled(String),
    #[error("train ratio must be strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("cannot read corpus {path}: {source}")]
    Corpus { path: PathBuf, source: io::Error },
    #[error(transparent)]
    TfIdf(#[from] TfIdfError),
    #[error(transparent)]
    Chi2(#[from] Chi2Error),
    #[error(transparent)]
    NaiveBayes(#[from] NbError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

/// Reads `<root>/ransom/*` and `<root>/benign/*`. Ids are file names; files
/// that are not valid UTF-8 are decoded lossily. Documents come back sorted
/// by label, then id.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Vec<Document>, PipelineError> {
    let root = root.as_ref();
    let mut docs = Vec::new();
    for label in Label::ALL {
        let dir = root.join(label.as_str());
        let err = |source| PipelineError::Corpus {
            path: dir.clone(),
            source,
        };
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(err)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        entries.retain(|p| p.is_file());
        entries.sort();
        for path in entries {
            let bytes = fs::read(&path).map_err(|source| PipelineError::Corpus {
                path: path.clone(),
                source,
            })?;
            let id = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            docs.push(Document::labeled(id, String::from_utf8_lossy(&bytes), label));
        }
    }
    Ok(docs)
}

struct Prepared<'a> {
    ids: Vec<&'a str>,
    tokens: Vec<Vec<String>>,
    labels: Vec<Label>,
}

fn prepare(corpus: &[Document]) -> Result<Prepared<'_>, PipelineError> {
    let labels = corpus
        .iter()
        .map(|d| d.label.ok_or_else(|| PipelineError::Unlabeled(d.id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        ids: corpus.iter().map(|d| d.id.as_str()).collect(),
        tokens: corpus.iter().map(|d| preprocess(&d.text)).collect(),
        labels,
    })
}

fn class_indices(labels: &[Label]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        out[l.index()].push(i);
    }
    out
}

fn require_per_class(labels: &[Label], needed: usize) -> Result<[Vec<usize>; 2], PipelineError> {
    let by_class = class_indices(labels);
    for label in Label::ALL {
        let count = by_class[label.index()].len();
        if count < needed {
            return Err(PipelineError::TooFewDocuments { label, count, needed });
        }
    }
    Ok(by_class)
}

/// Stratified hold-out split. Each class is shuffled with a seeded ChaCha8
/// stream (benign first, then ransom) and its first `round(n * ratio)`
/// members, clamped to `1..n`, go to training. Returns ascending
/// `(train, test)` index lists.
pub fn stratified_split(labels: &[Label], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PipelineError::InvalidRatio(ratio));
    }
    let by_class = require_per_class(labels, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in by_class {
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified K-fold assignment: each class is shuffled with the seeded
/// stream and dealt round-robin. Returns the fold number of every document.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>, PipelineError> {
    if folds < 2 {
        return Err(PipelineError::InvalidFolds(folds));
    }
    let by_class = require_per_class(labels, folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    for mut members in by_class {
        members.shuffle(&mut rng);
        for (pos, doc) in members.into_iter().enumerate() {
            assignment[doc] = pos % folds;
        }
    }
    Ok(assignment)
}

fn fingerprint(ids: &[&str], labels: &[Label], config: &TrainConfig) -> String {
    let mut material = format!(
        "{PREPROCESSING_TAG}\nk={}\nalpha={:?}\nratio={:?}\nseed={}\n",
        config.k, config.alpha, config.train_ratio, config.seed
    );
    for (id, label) in ids.iter().zip(labels) {
        material.push_str(&format!("{label}/{id}\n"));
    }
    Sha256Digest::of_bytes(material.as_bytes()).to_string()
}

fn fit_on(p: &Prepared<'_>, rows: &[usize], config: &TrainConfig) -> Result<ModelBundle, PipelineError> {
    let tokens: Vec<&Vec<String>> = rows.iter().map(|&i| &p.tokens[i]).collect();
    let labels: Vec<Label> = rows.iter().map(|&i| p.labels[i]).collect();
    let owned: Vec<Vec<&str>> = tokens
        .iter()
        .map(|t| t.iter().map(String::as_str).collect())
        .collect();
    let tfidf = TfIdfModel::fit(&owned)?;
    let x: Vec<_> = owned.iter().map(|t| tfidf.transform(t)).collect();
    let selector = chi2_select(&x, &labels, tfidf.vocabulary_size(), config.k)?;
    let projected: Vec<Vec<f64>> = x.iter().map(|v| selector.project(v)).collect();
    let nb = fit_mnb(&projected, &labels, config.alpha)?;
    let ids: Vec<&str> = rows.iter().map(|&i| p.ids[i]).collect();
    Ok(ModelBundle::new(tfidf, selector, nb, fingerprint(&ids, &labels, config))?)
}

fn evaluate(bundle: &ModelBundle, p: &Prepared<'_>, rows: &[usize], seed: u64) -> Metrics {
    let truth: Vec<Label> = rows.iter().map(|&i| p.labels[i]).collect();
    let predicted: Vec<Label> = rows
        .iter()
        .map(|&i| bundle.predict_tokens(&p.tokens[i]).label)
        .collect();
    Metrics::from_predictions(&truth, &predicted, seed)
}

/// Fits on every document (no hold-out).
pub fn fit_bundle(corpus: &[Document], config: &TrainConfig) -> Result<ModelBundle, PipelineError> {
    let p = prepare(corpus)?;
    require_per_class(&p.labels, 1)?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    fit_on(&p, &all, config)
}

/// Stratified split, fit on the training part, metrics on the held-out part.
pub fn train_pipeline(corpus: &[Document], config: &TrainConfig) -> Result<(ModelBundle, Metrics), PipelineError> {
    let p = prepare(corpus)?;
    let (train, test) = stratified_split(&p.labels, config.train_ratio, config.seed)?;
    let bundle = fit_on(&p, &train, config)?;
    let metrics = evaluate(&bundle, &p, &test, config.seed);
    Ok((bundle, metrics))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub seed: u64,
}

/// Stratified K-fold cross-validation. Every fold refits the whole pipeline
/// on the remaining folds.
pub fn cross_validate(corpus: &[Document], folds: usize, config: &TrainConfig) -> Result<CrossValidation, PipelineError> {
    let p = prepare(corpus)?;
    let assignment = stratified_folds(&p.labels, folds, config.seed)?;
    let mut fold_accuracies = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| assignment[i] == fold);
        let bundle = fit_on(&p, &train, config)?;
        fold_accuracies.push(evaluate(&bundle, &p, &test, config.seed).accuracy);
    }
    let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
    Ok(CrossValidation {
        fold_accuracies,
        mean,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Benign, Ransom};

    fn synthetic(n_per_class: usize) -> Vec<Document> {
        let mut docs = Vec::new();
        for i in 0..n_per_class {
            docs.push(Document::labeled(
                format!("r{i:03}"),
                format!("files encrypted pay bitcoin decrypt key victim{i}"),
                Ransom,
            ));
            docs.push(Document::labeled(
                format!("b{i:03}"),
                format!("match season team coach goal player{i}"),
                Benign,
            ));
        }
        docs
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<Label> = (0..200).map(|i| if i < 100 { Ransom } else { Benign }).collect();
        let (train, test) = stratified_split(&labels, 0.7, 42).unwrap();
        let count = |rows: &[usize], l| rows.iter().filter(|&&i| labels[i] == l).count();
        assert_eq!((count(&train, Ransom), count(&train, Benign)), (70, 70));
        assert_eq!((count(&test, Ransom), count(&test, Benign)), (30, 30));
        let (train2, _) = stratified_split(&labels, 0.7, 42).unwrap();
        assert_eq!(train, train2);
        let (train3, _) = stratified_split(&labels, 0.7, 7).unwrap();
        assert_ne!(train, train3);
    }

    #[test]
    fn split_needs_two_per_class() {
        let err = stratified_split(&[Ransom, Benign, Benign], 0.7, 1).unwrap_err();
        assert!(matches!(err, PipelineError::TooFewDocuments { label: Ransom, count: 1, .. }));
        assert!(matches!(stratified_split(&[Ransom; 4], 1.0, 1), Err(PipelineError::InvalidRatio(_))));
    }

    #[test]
    fn folds_are_balanced_and_deterministic() {
        let labels: Vec<Label> = (0..40).map(|i| if i % 4 == 0 { Ransom } else { Benign }).collect();
        let a = stratified_folds(&labels, 10, 3).unwrap();
        assert_eq!(a, stratified_folds(&labels, 10, 3).unwrap());
        for fold in 0..10 {
            let members: Vec<_> = (0..40).filter(|&i| a[i] == fold).collect();
            assert_eq!(members.iter().filter(|&&i| labels[i] == Ransom).count(), 1);
            assert_eq!(members.len(), 4);
        }
        assert!(matches!(stratified_folds(&labels, 11, 3), Err(PipelineError::TooFewDocuments { .. })));
    }

    #[test]
    fn training_is_deterministic() {
        let docs = synthetic(20);
        let cfg = TrainConfig::default();
        let (b1, m1) = train_pipeline(&docs, &cfg).unwrap();
        let (b2, m2) = train_pipeline(&docs, &cfg).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(m1, m2);
        assert_eq!(b1.to_json().unwrap(), b2.to_json().unwrap());
        assert_eq!(m1.accuracy, 1.0);
    }

    #[test]
    fn separable_corpus_cross_validates_perfectly() {
        let cv = cross_validate(&synthetic(10), 10, &TrainConfig::default()).unwrap();
        assert_eq!(cv.fold_accuracies.len(), 10);
        assert_eq!(cv.mean, 1.0);
    }

    #[test]
    fn test_only_tokens_never_reach_the_vocabulary() {
        let mut docs = synthetic(10);
        let labels: Vec<Label> = docs.iter().map(|d| d.label.unwrap()).collect();
        let (_, test) = stratified_split(&labels, 0.7, DEFAULT_SEED).unwrap();
        for &i in &test {
            docs[i].text.push_str(" zzpoison");
        }
        let (bundle, _) = train_pipeline(&docs, &TrainConfig::default()).unwrap();
        assert!(bundle.tfidf.index_of("zzpoison").is_none());
        assert_eq!(bundle.tfidf.doc_count(), 14);
    }

    #[test]
    fn unlabeled_documents_rejected() {
        let docs = vec![Document {
            id: "x".into(),
            text: "t".into(),
            label: None,
        }];
        assert!(matches!(fit_bundle(&docs, &TrainConfig::default()), Err(PipelineError::Unlabeled(_))));
    }
}
