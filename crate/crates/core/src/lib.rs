//! A desk-scale laboratory for comparing bootstrap aggregation against
//! split-randomized random forests on simulated regression problems.
//!
//! The pipeline: [`dgp`] defines and samples data-generating processes;
//! [`cart`] grows least-squares regression trees with optional per-split
//! covariate subsampling; [`ensemble`] averages them; [`metrics`] decomposes
//! out-of-sample error into bias, variance, and noise and measures tree
//! decorrelation; [`harness`] orchestrates paired replication experiments
//! and renders tables, sweeps, and figure data.

pub mod cart;
pub mod dgp;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod seed;

pub use error::{Error, Result};
