//! Rebalancing of class-imbalanced tabular data by mixing synthetic
//! minority-class samples from three generator pools.
//!
//! The mixing proportions are searched with a binary-chromosome genetic
//! algorithm whose fitness is the G-mean of a classifier trained on the
//! candidate balanced set. Data flows through these modules:
//!
//! * [`data`] ingests SMART telemetry, normalizes it and splits it.
//! * [`generators`] fits the minority-class samplers and manages pools.
//! * [`classifiers`] holds the five from-scratch classifier families.
//! * [`metrics`] computes confusion matrices and G-mean.
//! * [`ga`] decodes genotypes, assembles balanced sets and runs the search.
//! * [`harness`] drives whole experiments and renders reports.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod ga;
pub mod generators;
pub mod harness;
pub mod metrics;
pub mod seed;

pub use error::{Error, Result};
