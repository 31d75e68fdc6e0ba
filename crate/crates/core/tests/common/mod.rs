#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use ransomguard::nlp::pipeline::{load_corpus, train_pipeline, Document, TrainConfig};
use ransomguard::nlp::Metrics;
use ransomguard::{save_bundle, ModelBundle};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus() -> &'static [Document] {
    static CORPUS: OnceLock<Vec<Document>> = OnceLock::new();
    CORPUS.get_or_init(|| load_corpus(corpus_dir()).expect("corpus loads"))
}

pub struct Trained {
    pub bundle: ModelBundle,
    pub metrics: Metrics,
    pub model_path: PathBuf,
    _dir: tempfile::TempDir,
}

/// Model trained once per test binary with the default configuration.
pub fn trained() -> &'static Trained {
    static TRAINED: OnceLock<Trained> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let (bundle, metrics) = train_pipeline(corpus(), &TrainConfig::default()).expect("training succeeds");
        let dir = tempfile::tempdir().expect("tempdir");
        let model_path = dir.path().join("model.rgmodel");
        save_bundle(&bundle, &model_path).expect("bundle saves");
        Trained {
            bundle,
            metrics,
            model_path,
            _dir: dir,
        }
    })
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ransomguard")
}
