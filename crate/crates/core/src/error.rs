use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("file {0} is empty")]
    EmptyFile(PathBuf),

    #[error("file {path}: {ragged} of {total} rows are ragged (tolerance {tolerance})")]
    RaggedRows {
        path: PathBuf,
        ragged: usize,
        total: usize,
        tolerance: f64,
    },

    #[error("feature schema mismatch: model has version {model}, expected {expected}")]
    SchemaMismatch { model: u32, expected: u32 },

    #[error("brute-force guard exceeded: {edges} edges (limit {limit})")]
    OracleGuard { edges: usize, limit: usize },

    #[error("predicted and ground-truth table sets differ: {0}")]
    TableSetMismatch(String),

    #[error("case {0} has no ground truth")]
    MissingGroundTruth(String),

    #[error("no tables found in {0}")]
    NoTables(PathBuf),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
