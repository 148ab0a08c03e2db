//! Filesystem, configuration, and command-line layers over the core novelty
//! detection library: IDX ingestion, binary model/dataset files with atomic
//! writes, flat key=value run configuration, JSON reports, and deterministic
//! multi-threaded batch scoring.

pub mod batch;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod idx;
pub mod report;

pub use error::{Error, Result};
