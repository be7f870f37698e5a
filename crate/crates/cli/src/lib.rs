//! Config-driven experiments, artifacts and verification suites.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod suites;
