use indexmap::IndexMap;

use super::{euclidean, transport::solve_transport};
use crate::embed::WordVectors;
use crate::error::{Error, Result};

/// Normalized bag-of-words over word-vector vocabulary indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BowDistribution {
    pub tokens: Vec<usize>,
    pub weights: Vec<f64>,
}

impl BowDistribution {
    /// Builds the distribution from a token sequence. Tokens without a
    /// vector are dropped and the rest renormalized; the number of dropped
    /// occurrences is returned alongside.
    pub fn from_tokens(tokens: &[String], wv: &WordVectors) -> Result<(Self, usize)> {
        let mut counts: IndexMap<usize, f64> = IndexMap::new();
        let mut dropped = 0;
        for t in tokens {
            match wv.index_of(t) {
                Some(i) => *counts.entry(i).or_insert(0.0) += 1.0,
                None => dropped += 1,
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let total: f64 = counts.values().sum();
        let (tokens, weights) = counts.into_iter().map(|(i, c)| (i, c / total)).unzip();
        Ok((BowDistribution { tokens, weights }, dropped))
    }
}

/// Exact Word Mover's Distance: the optimal transport cost between two
/// bag-of-words distributions with Euclidean ground cost between word
/// vectors.
pub fn wmd(a: &BowDistribution, b: &BowDistribution, wv: &WordVectors) -> Result<f64> {
    wmd_with(a, b, |i, j| euclidean(wv.vector_at(i), wv.vector_at(j)))
}

/// WMD with a caller-supplied ground distance between vocabulary indices.
pub(crate) fn wmd_with(a: &BowDistribution, b: &BowDistribution, dist: impl Fn(usize, usize) -> f64) -> Result<f64> {
    if a.tokens.is_empty() || b.tokens.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if a == b {
        return Ok(0.0);
    }
    let mut cost = Vec::with_capacity(a.tokens.len() * b.tokens.len());
    for &i in &a.tokens {
        for &j in &b.tokens {
            cost.push(if i == j { 0.0 } else { dist(i, j) });
        }
    }
    Ok(solve_transport(&a.weights, &b.weights, &cost)?.cost)
}
