//! Budget-constrained pool-based active learning for regression.
//!
//! The crate covers the full loop: ingest or synthesize per-round sample
//! pools, pick samples under a per-round budget with an initialization or
//! model-aware selection strategy, obtain labels from an oracle, retrain a
//! regressor, and score the resulting learning curve with temporal quality
//! measures.
//!
//! Modules:
//! - [`data`]: sensor schemas, CSV ingestion, sample assembly, imputation,
//!   and synthetic pool streams.
//! - [`regressors`]: trainable regression models and committees.
//! - [`clustering`]: k-means, silhouette, and medoids.
//! - [`strategies`]: budgeted sample selection, both model-free and
//!   model-aware.
//! - [`metrics`]: learning-curve measures and paired significance tests.
//! - [`scheduler`]: the round-by-round collection schedule and multi-config
//!   comparisons.

pub mod clustering;
pub mod data;
pub mod error;
pub mod metrics;
pub mod regressors;
pub mod scheduler;
pub mod seeds;
pub mod stats;
pub mod strategies;

pub use error::{Error, Result};
