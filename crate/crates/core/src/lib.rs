//! Batch forecasting of bike availability in a dock-based bike-share
//! network.
//!
//! The pipeline runs in stages: raw CSV ingestion with change detection
//! ([`ingest`]), trip-graph neighbor and region derivation ([`graph`]),
//! predictor/target assembly on a regular time grid ([`features`]), three
//! regressors — random forest and least-squares boosting ([`trees`]) and
//! partial least squares ([`plsr`]) — and sweep-based evaluation plus a
//! seeded synthetic network generator ([`experiments`]).

pub mod error;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod plsr;
pub mod rng;
pub mod trees;

pub use error::{Error, Result};
