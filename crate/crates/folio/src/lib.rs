//! Application layer for `folio-core`: CSV ingestion, robust feature
//! scaling, synthetic data, TOML configuration, result files and the
//! pipeline behind the `folio` command-line tool.

pub mod checkpoint;
pub mod config;
pub mod csvio;
mod error;
pub mod pipeline;
pub mod report;
pub mod scaling;
pub mod synth;

pub use error::{FolioError, Result};
