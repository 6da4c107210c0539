//! Pairwise similarity kernels and the normalized similarity matrix.

mod transport;
mod wmd;

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embed::{SentenceVectors, WordVectors};
use crate::error::{Error, Result};
use crate::preprocess::TokenizedDoc;

pub use transport::{solve_transport, Certificate, TransportPlan};
pub use wmd::{wmd, BowDistribution};
use wmd::wmd_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Euclidean,
    Wmd,
}

impl Metric {
    pub fn kind(self) -> ScoreKind {
        match self {
            Metric::Cosine => ScoreKind::Similarity,
            Metric::Euclidean | Metric::Wmd => ScoreKind::Distance,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
            Metric::Wmd => "wmd",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            "wmd" => Ok(Metric::Wmd),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

/// Whether larger raw scores mean more or less similar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Similarity,
    Distance,
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
            context: "cosine operands".into(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

pub fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "euclidean operands differ in dimension");
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Min-max rescaling of a symmetric `m × m` score matrix over its
/// off-diagonal entries, flipped for distances so that 1 means most
/// similar. A constant matrix maps to all zeros; the diagonal is 1.
pub fn normalize_scores(m: usize, raw: &[f64], kind: ScoreKind) -> Vec<f64> {
    assert_eq!(raw.len(), m * m, "raw score matrix shape");
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..m {
        for j in i + 1..m {
            lo = lo.min(raw[i * m + j]);
            hi = hi.max(raw[i * m + j]);
        }
    }
    let span = hi - lo;
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        out[i * m + i] = 1.0;
        for j in i + 1..m {
            let s = if span > 0.0 {
                let t = (raw[i * m + j] - lo) / span;
                match kind {
                    ScoreKind::Similarity => t,
                    ScoreKind::Distance => 1.0 - t,
                }
            } else {
                0.0
            };
            out[i * m + j] = s;
            out[j * m + i] = s;
        }
    }
    out
}

/// Symmetric normalized similarity in [0, 1] with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    m: usize,
    values: Vec<f64>,
    pub metric: Metric,
    pub provenance: String,
}

impl SimilarityMatrix {
    /// Wraps already-normalized values. Panics when the shape is wrong.
    pub fn from_normalized(m: usize, values: Vec<f64>, metric: Metric, provenance: impl Into<String>) -> Self {
        assert_eq!(values.len(), m * m, "similarity matrix shape");
        SimilarityMatrix { m, values, metric, provenance: provenance.into() }
    }

    pub fn from_raw(m: usize, raw: &[f64], metric: Metric, provenance: impl Into<String>) -> Self {
        Self::from_normalized(m, normalize_scores(m, raw, metric.kind()), metric, provenance)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The principal sub-matrix over `indices`, in that order.
    pub fn restrict(&self, indices: &[usize]) -> SimilarityMatrix {
        let k = indices.len();
        let mut values = Vec::with_capacity(k * k);
        for &i in indices {
            let row = self.row(i);
            values.extend(indices.iter().map(|&j| row[j]));
        }
        SimilarityMatrix { m: k, values, metric: self.metric, provenance: self.provenance.clone() }
    }

    /// Header `m metric provenance`, then one line per row `i ≥ 1` holding
    /// the strictly-lower-triangle entries `(i, 0..i)`.
    pub fn to_text(&self) -> String {
        let provenance: String = self
            .provenance
            .chars()
            .map(|c| if c.is_whitespace() { '_' } else { c })
            .collect();
        let provenance = if provenance.is_empty() { "-".to_string() } else { provenance };
        let mut out = format!("{} {} {}\n", self.m, self.metric, provenance);
        for i in 1..self.m {
            let row = self.row(i);
            for (j, x) in row[..i].iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{x}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let malformed = |line: usize, message: String| Error::MalformedRecord { line, message };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| malformed(1, "missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(malformed(1, "header must be `m metric provenance`".into()));
        }
        let m: usize = fields[0].parse().map_err(|_| malformed(1, "bad size".into()))?;
        let metric: Metric = fields[1].parse()?;
        let mut values = vec![0.0; m * m];
        for i in 0..m {
            values[i * m + i] = 1.0;
        }
        for i in 1..m {
            let line = lines.next().ok_or_else(|| malformed(i + 1, "missing row".into()))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e: std::num::ParseFloatError| malformed(i + 1, e.to_string()))?;
            if row.len() != i {
                return Err(malformed(i + 1, format!("expected {i} values, found {}", row.len())));
            }
            for (j, x) in row.into_iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(malformed(i + 1, format!("value {x} outside [0, 1]")));
                }
                values[i * m + j] = x;
                values[j * m + i] = x;
            }
        }
        Ok(SimilarityMatrix { m, values, metric, provenance: fields[2].to_string() })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Vectors a similarity matrix is computed from.
#[derive(Debug, Clone, Copy)]
pub enum Representation<'a> {
    Sentence(&'a SentenceVectors),
    /// Word vectors plus the tokenized test cases, in corpus order.
    Word { vectors: &'a WordVectors, docs: &'a [TokenizedDoc] },
}

/// Raw pairwise scores for every `i < j` (mirrored), diagonal left at 0.
pub fn raw_scores(corpus: &Corpus, rep: Representation<'_>, metric: Metric) -> Result<Vec<f64>> {
    let m = corpus.m();
    let rows: Vec<Vec<f64>> = match (rep, metric) {
        (Representation::Sentence(sv), Metric::Cosine | Metric::Euclidean) => {
            let vecs = sv.aligned(corpus.test_cases().iter().map(|tc| tc.id.as_str()))?;
            (0..m)
                .into_par_iter()
                .map(|i| {
                    (i + 1..m)
                        .map(|j| match metric {
                            Metric::Cosine => cosine(vecs[i], vecs[j]),
                            _ => Ok(euclidean(vecs[i], vecs[j])),
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?
        }
        (Representation::Word { vectors, docs }, Metric::Wmd) => {
            if docs.len() != m {
                return Err(Error::SizeMismatch { matrix: docs.len(), corpus: m });
            }
            let mut bows = Vec::with_capacity(m);
            let mut dropped = 0;
            for (doc, tc) in docs.iter().zip(corpus.test_cases()) {
                if !doc.test_case_id.is_empty() && doc.test_case_id != tc.id {
                    return Err(Error::MissingVector(tc.id.clone()));
                }
                let (bow, d) = BowDistribution::from_tokens(&doc.tokens, vectors)?;
                dropped += d;
                bows.push(bow);
            }
            if dropped > 0 {
                log::warn!("dropped {dropped} out-of-vocabulary token occurrences before WMD");
            }
            let table = GroundDistances::new(&bows, vectors);
            (0..m)
                .into_par_iter()
                .map(|i| {
                    (i + 1..m)
                        .map(|j| wmd_with(&bows[i], &bows[j], |a, b| table.get(a, b, vectors)))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?
        }
        (Representation::Sentence(_), Metric::Wmd) => {
            return Err(Error::IncompatibleMetric { metric: metric.to_string(), level: "sentence-level" })
        }
        (Representation::Word { .. }, _) => {
            return Err(Error::IncompatibleMetric { metric: metric.to_string(), level: "word-level" })
        }
    };
    let mut raw = vec![0.0; m * m];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, x) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            raw[i * m + j] = x;
            raw[j * m + i] = x;
        }
    }
    Ok(raw)
}

/// Euclidean distances between the word vectors the corpus uses, computed
/// once. Falls back to on-the-fly distances for very large vocabularies.
struct GroundDistances {
    local: Vec<usize>,
    n: usize,
    table: Vec<f64>,
}

const MAX_TABLE_WORDS: usize = 3000;

impl GroundDistances {
    fn new(bows: &[BowDistribution], vectors: &WordVectors) -> Self {
        let mut local = vec![usize::MAX; vectors.vocab_size()];
        let mut used = Vec::new();
        for bow in bows {
            for &t in &bow.tokens {
                if local[t] == usize::MAX {
                    local[t] = used.len();
                    used.push(t);
                }
            }
        }
        let n = used.len();
        if n > MAX_TABLE_WORDS {
            return GroundDistances { local, n: 0, table: Vec::new() };
        }
        let table = (0..n * n)
            .into_par_iter()
            .map(|c| euclidean(vectors.vector_at(used[c / n]), vectors.vector_at(used[c % n])))
            .collect();
        GroundDistances { local, n, table }
    }

    fn get(&self, a: usize, b: usize, vectors: &WordVectors) -> f64 {
        if self.n == 0 {
            return euclidean(vectors.vector_at(a), vectors.vector_at(b));
        }
        self.table[self.local[a] * self.n + self.local[b]]
    }
}

pub fn build_similarity_matrix(
    corpus: &Corpus,
    rep: Representation<'_>,
    metric: Metric,
    provenance: impl Into<String>,
) -> Result<SimilarityMatrix> {
    let raw = raw_scores(corpus, rep, metric)?;
    Ok(SimilarityMatrix::from_raw(corpus.m(), &raw, metric, provenance))
}
