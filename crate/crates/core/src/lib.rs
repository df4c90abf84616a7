//! Probabilistic and deterministic traffic forecasting for multi-beam
//! networks, with a closed-loop resource-provisioning simulator.
//!
//! The crate covers the full pipeline: hourly traffic ingestion or synthetic
//! generation, a Gaussian-output feed-forward forecaster trained by negative
//! log-likelihood, a deterministic LSTM baseline trained by MSE, quantile
//! extraction (closed-form and empirical), allocation policies, and
//! over/under-provisioning audits. Everything is seeded and bit-reproducible.

pub mod decision;
pub mod error;
pub mod files;
pub mod lstm;
pub mod metrics;
pub mod nn;
pub mod normal;
pub mod rng;
pub mod sff;
pub mod sim;
pub mod timeseries;
pub mod verify;

pub use error::{Error, Result};
