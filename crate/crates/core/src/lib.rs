//! Benchmark suite comparing a quantum circuit Born machine against a
//! restricted Boltzmann machine on probabilistic targets derived from
//! cardinality-constrained portfolio optimization.
//!
//! The pipeline: price data (real or synthetic) -> return statistics ->
//! per-subset minimum-risk frontier points -> Boltzmann target distribution
//! -> both models trained under equal parameter budgets -> clipped KL scores
//! with bootstrap statistics.

// Negated float comparisons below are deliberate NaN guards; index loops
// mirror the matrix math they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod frontier;
pub mod harness;
pub mod market_data;
pub mod metrics;
pub mod optimizer;
pub mod qcbm;
pub mod rbm;

pub use error::{Error, Result};
