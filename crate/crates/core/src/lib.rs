//! Training recognizers on synthetic data with a measurable distribution gap.
//!
//! The crate generates "real" and "synthetic" datasets from parametric worlds
//! with exact densities ([`gapgen`]), trains small recognizers with a
//! dual-statistics batch-norm layer ([`nn`], [`recognizer`], [`trainer`]),
//! and curates synthetic samples by discriminator-driven rejection sampling
//! ([`ratio`]). Everything that has a closed form is checked against it.

pub mod error;
pub mod experiment;
pub mod gapgen;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod ratio;
pub mod recognizer;
pub mod seed;
pub mod selftest;
pub mod trainer;

pub use error::{Error, Result};
