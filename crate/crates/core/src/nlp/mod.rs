//! Ransom-note classifier: preprocessing, TF-IDF, chi-squared feature
//! selection and multinomial naive Bayes.

pub mod chi2;
pub mod classify;
pub mod label;
pub mod metrics;
pub mod naive_bayes;
pub mod pipeline;
pub mod preprocess;
pub mod stem;
pub mod tfidf;

pub use chi2::{chi2_select, Chi2Selector};
pub use classify::{classify_bytes, classify_file};
pub use label::Label;
pub use metrics::Metrics;
pub use naive_bayes::{fit_mnb, NbModel, Prediction};
pub use pipeline::{cross_validate, load_corpus, train_pipeline, CrossValidation, Document, TrainConfig};
pub use preprocess::preprocess;
pub use tfidf::{SparseVector, TfIdfModel};
