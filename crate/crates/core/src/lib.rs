//! Online Bayesian regression by sequential Monte Carlo with Gibbs and
//! Metropolis-Hastings rejuvenation, seeded by a batch warm-up chain.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix algebra.
#![allow(clippy::needless_range_loop)]

pub mod compare;
pub mod config;
pub mod design;
pub mod discrete;
pub mod engine;
pub mod error;
pub mod family;
pub mod gibbs;
pub mod hyper;
pub mod ingest;
pub mod linalg;
pub mod model_gaussian;
pub mod model_glm;
pub mod output;
pub mod random;
pub mod resample;
pub mod simulate;
pub mod smc;
pub mod stream;
pub mod suffstats;
pub mod warmup;

pub use error::{Error, Result};
