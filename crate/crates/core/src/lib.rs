//! Coverage-preserving test-suite minimization driven by test-case
//! similarity.

pub mod baselines;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod harness;
pub mod minimizer;
pub mod oracle;
pub mod preprocess;
pub mod similarity;

pub use error::{Error, Result};
