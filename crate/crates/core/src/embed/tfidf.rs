use std::collections::HashMap;

use indexmap::IndexMap;

use super::{SentenceVectors, VectorSource};
use crate::error::{Error, Result};
use crate::preprocess::TokenizedDoc;

/// Raw term counts times smoothed idf `ln((1+N)/(1+df)) + 1`, L2-normalized.
/// Components follow first-appearance order of terms across the documents.
pub fn tfidf_embed(docs: &[TokenizedDoc]) -> Result<SentenceVectors> {
    if docs.len() < 2 {
        return Err(Error::TooFewDocuments { needed: 2, got: docs.len() });
    }
    let mut vocab: IndexMap<&str, usize> = IndexMap::new();
    let mut counts: Vec<HashMap<usize, f64>> = Vec::with_capacity(docs.len());
    for doc in docs {
        if doc.tokens.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut tf = HashMap::new();
        for t in &doc.tokens {
            let next = vocab.len();
            let idx = *vocab.entry(t.as_str()).or_insert(next);
            *tf.entry(idx).or_insert(0.0) += 1.0;
        }
        counts.push(tf);
    }
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let dim = vocab.len();
    let mut df = vec![0usize; dim];
    for tf in &counts {
        for &w in tf.keys() {
            df[w] += 1;
        }
    }
    let n = docs.len() as f64;
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();

    let mut vectors = IndexMap::with_capacity(docs.len());
    for (doc, tf) in docs.iter().zip(&counts) {
        let mut v = vec![0.0; dim];
        for (&w, &c) in tf {
            v[w] = c * idf[w];
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        if vectors.insert(doc.test_case_id.clone(), v).is_some() {
            return Err(Error::DuplicateId(doc.test_case_id.clone()));
        }
    }
    Ok(SentenceVectors { dim, vectors, source: VectorSource::Tfidf })
}
