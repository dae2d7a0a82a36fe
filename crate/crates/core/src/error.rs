use std::path::PathBuf;

use thiserror::Error;

use crate::track::{GlobalLabel, Scan};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("invalid window [{start}, {end}]")]
    InvalidWindow { start: Scan, end: Scan },
    #[error("duplicate label {0}")]
    DuplicateLabel(GlobalLabel),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix is empty")]
    Empty,
    #[error("cost matrix shape {rows}x{cols} does not match {len} entries")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("cost entry ({row}, {col}) = {value} is not a finite non-negative number")]
    InvalidEntry { row: usize, col: usize, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("Wasserstein distance is undefined for an empty set")]
    EmptySet,
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("label {0} is missing from the matched history label space")]
    UnknownLabel(GlobalLabel),
    #[error("track {0} has no sample inside the fusion window")]
    EmptyTrack(GlobalLabel),
    #[error("invalid fusing weights ({own}, {peer}): both must be positive and sum to one")]
    InvalidWeights { own: f64, peer: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed log {path}: {message}")]
    Log { path: PathBuf, message: String },
    #[error("run with seed {seed} failed: {message}")]
    Numerical { seed: u64, message: String },
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 3,
            HarnessError::Io { .. } | HarnessError::Log { .. } => 4,
            HarnessError::Numerical { .. } | HarnessError::Fusion(_) => 5,
        }
    }
}
