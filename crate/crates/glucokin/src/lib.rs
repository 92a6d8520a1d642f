//! File formats, dataset evaluation and the `glucokin` command-line tool.
//!
//! The algorithms live in [`glucokin_core`]; this crate adds the GLKF frame
//! container with its JSON sidecar, dataset manifests written by the
//! simulator, calibration-curve files, parallel dataset evaluation and the
//! CSV/SVG reports.

pub mod cli;
pub mod container;
pub mod evaluate;
pub mod manifest;
pub mod report;

pub use glucokin_core as core;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] glucokin_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
