//! TF-IDF vectorization with smoothed idf and L2 normalization.
//!
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, raw term counts as tf.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TfIdfError {
    #[error("cannot fit a vectorizer on an empty corpus")]
    EmptyCorpus,
}

/// Sparse vector of `(feature index, weight)` pairs sorted by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds from unsorted pairs; duplicate indices are summed and zeros dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in pairs {
            *acc.entry(i).or_insert(0.0) += w;
        }
        SparseVector {
            entries: acc.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |pos| self.entries[pos].1)
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    /// Tokens in feature-index order. Indices follow lexicographic token order.
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    doc_count: usize,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
}

pub fn smooth_idf(doc_count: usize, doc_freq: usize) -> f64 {
    ((1.0 + doc_count as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

impl TfIdfModel {
    /// Fits vocabulary and idf weights on training token lists.
    pub fn fit<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<Self, TfIdfError> {
        if corpus.is_empty() {
            return Err(TfIdfError::EmptyCorpus);
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in corpus {
            let distinct: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for tok in distinct {
                *df.entry(tok).or_insert(0) += 1;
            }
        }
        let tokens: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        let doc_freq: Vec<usize> = df.values().copied().collect();
        Ok(Self::from_parts(tokens, corpus.len(), doc_freq))
    }

    /// Rebuilds a model from persisted vocabulary and document frequencies.
    pub fn from_parts(tokens: Vec<String>, doc_count: usize, doc_freq: Vec<usize>) -> Self {
        assert_eq!(tokens.len(), doc_freq.len());
        let idf = doc_freq.iter().map(|&df| smooth_idf(doc_count, df)).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfIdfModel {
            tokens,
            index,
            doc_count,
            doc_freq,
            idf,
        }
    }

    pub fn vocabulary_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Weighted, L2-normalized vector; out-of-vocabulary tokens are ignored.
    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let counts = SparseVector::from_pairs(
            tokens
                .iter()
                .filter_map(|t| self.index_of(t.as_ref()))
                .map(|i| (i, 1.0)),
        );
        let weighted: Vec<(usize, f64)> =
            counts.entries.iter().map(|&(i, tf)| (i, tf * self.idf[i])).collect();
        let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SparseVector::default();
        }
        SparseVector {
            entries: weighted.into_iter().map(|(i, w)| (i, w / norm)).collect(),
        }
    }
}
