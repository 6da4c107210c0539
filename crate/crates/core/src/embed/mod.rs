//! Word- and sentence-level vector representations.

mod cbow;
mod io;
mod tfidf;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::TokenizedDoc;

pub use cbow::{train_cbow, CbowConfig, CbowModel};
pub use io::{
    export_sentence_vectors, export_word_vectors, import_sentence_vectors,
    import_word_vectors, read_vectors, write_vectors,
};
pub use tfidf::tfidf_embed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorSource {
    Tfidf,
    Imported,
}

/// One dense vector per test case, keyed by test-case id in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVectors {
    pub dim: usize,
    pub vectors: IndexMap<String, Vec<f64>>,
    pub source: VectorSource,
}

impl SentenceVectors {
    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    /// Vectors in the order of the given ids; fails on the first missing id.
    pub fn aligned<'a>(&'a self, ids: impl IntoIterator<Item = &'a str>) -> Result<Vec<&'a [f64]>> {
        ids.into_iter()
            .map(|id| self.get(id).ok_or_else(|| Error::MissingVector(id.to_string())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub vectors: IndexMap<String, Vec<f64>>,
}

/// Fraction of corpus tokens (by occurrence) that have a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCoverage {
    pub coverage: f64,
    pub missing: Vec<String>,
}

/// Word-level vectors must cover at least this share of token occurrences.
pub const MIN_TOKEN_COVERAGE: f64 = 0.95;

impl WordVectors {
    pub fn vocab_size(&self) -> usize {
        self.vectors.len()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vectors.get_index_of(token)
    }

    pub fn vector_at(&self, index: usize) -> &[f64] {
        &self.vectors[index]
    }

    pub fn token_coverage(&self, docs: &[TokenizedDoc]) -> TokenCoverage {
        let mut total = 0usize;
        let mut hit = 0usize;
        let mut missing = indexmap::IndexSet::new();
        for t in docs.iter().flat_map(|d| &d.tokens) {
            total += 1;
            if self.vectors.contains_key(t) {
                hit += 1;
            } else {
                missing.insert(t.clone());
            }
        }
        let coverage = if total == 0 { 1.0 } else { hit as f64 / total as f64 };
        TokenCoverage { coverage, missing: missing.into_iter().collect() }
    }

    /// Fails when fewer than 95% of token occurrences have a vector.
    pub fn check_coverage(&self, docs: &[TokenizedDoc]) -> Result<TokenCoverage> {
        let report = self.token_coverage(docs);
        if report.coverage < MIN_TOKEN_COVERAGE {
            return Err(Error::InsufficientTokenCoverage {
                coverage: report.coverage,
                required: MIN_TOKEN_COVERAGE,
            });
        }
        if !report.missing.is_empty() {
            log::warn!(
                "{} distinct tokens have no vector (coverage {:.4})",
                report.missing.len(),
                report.coverage
            );
        }
        Ok(report)
    }
}
