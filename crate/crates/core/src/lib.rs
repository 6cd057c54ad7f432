//! fairtune-core: budget-aware hyperparameter search that decides, per
//! trial, whether to train a regular model or run an unfairness-mitigation
//! procedure, minimizing validation loss subject to a group-fairness
//! constraint.
//!
//! Modules:
//! - [`dataset`]: CSV loading, encoding, stratified splits, synthetic
//!   fixtures.
//! - [`learners`]: weight-aware base learners with declared search spaces.
//! - [`fairness`]: disparity metrics, the fairness indicator, and the loss.
//! - [`mitigation`]: exponentiated-gradient and grid-search reductions plus
//!   threshold post-processing.
//! - [`hpsearch`]: random and cost-frugal local searchers.
//! - [`scheduler`]: the adaptive choice between search and mitigation.
//! - [`runner`]: the budgeted trial loop, strategies, and resource
//!   breakdown.
//! - [`sim`]: table-driven deterministic evaluation.

pub mod dataset;
pub mod error;
pub mod fairness;
pub mod hpsearch;
pub mod learners;
pub mod matrix;
pub mod mitigation;
pub mod runner;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
