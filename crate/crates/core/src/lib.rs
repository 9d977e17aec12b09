//! Feature selection through a randomized recurrent expansion network.
//!
//! Inputs are pushed through a fixed random network, the expanded features
//! are scored for relevance and redundancy, and the best expanded features
//! are projected back onto the original inputs to rank them.

// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch, and the
// reference loops spell out `s = s + a * b` to mirror the order they check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::assign_op_pattern)]

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod oracle;
pub mod redundancy;
pub mod relevance;
pub mod rnp;
pub mod selector;
pub mod stats;
pub mod synthetic;

pub use dataset::{Dataset, Task};
pub use error::{Error, Result};
pub use selector::{select_features, ImportanceScores, SelectionConfig};
