use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate test case id {0:?}")]
    DuplicateId(String),

    #[error("test case {test_case:?} references unknown requirement {requirement:?}")]
    UnknownRequirement { test_case: String, requirement: String },

    #[error("fault matrix references unknown test case {0:?}")]
    UnknownTestCase(String),

    #[error("redundancy level is undefined: the selection detects no fault")]
    NoFaultsDetected,

    #[error("jaccard similarity of two empty sets is undefined")]
    EmptySets,

    #[error("empty document")]
    EmptyDocument,

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("need at least {needed} documents, got {got}")]
    TooFewDocuments { needed: usize, got: usize },

    #[error("vocabulary of {vocab} tokens is too small for {negative} negative samples")]
    VocabularyTooSmall { vocab: usize, negative: usize },

    #[error("corpus has {tokens} tokens, window {window} needs at least {needed}")]
    CorpusTooShort { tokens: usize, window: usize, needed: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch { expected: usize, found: usize, context: String },

    #[error("missing vector for {0:?}")]
    MissingVector(String),

    #[error("token coverage {coverage:.4} is below the required {required:.2}")]
    InsufficientTokenCoverage { coverage: f64, required: f64 },

    #[error("zero-norm vector")]
    ZeroVector,

    #[error("distribution is empty after dropping out-of-vocabulary tokens")]
    EmptyDistribution,

    #[error("metric {metric} is incompatible with a {level} representation")]
    IncompatibleMetric { metric: String, level: &'static str },

    #[error("similarity matrix has size {matrix}, corpus has {corpus} test cases")]
    SizeMismatch { matrix: usize, corpus: usize },

    #[error(
        "budget {budget} selects {selected} test cases but {required} requirements must be covered; \
         minimum feasible budget is {min_budget:.6}"
    )]
    InfeasibleBudget { budget: f64, selected: usize, required: usize, min_budget: f64 },

    #[error("transportation solver did not converge after {0} pivots")]
    SolverStalled(usize),

    #[error("no suite reached redundancy level {target} (closest achieved {closest:.4})")]
    RedundancyUnreachable { target: f64, closest: f64 },

    #[error("synthetic corpus cannot be generated: {0}")]
    UnsatisfiableSynthesis(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
