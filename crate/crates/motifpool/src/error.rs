//! Error types shared across the crate.

use thiserror::Error;

/// Errors from graph construction and dataset ingestion.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("missing mandatory file: {0}")]
    MissingFile(String),
    #[error("{file} line {line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("invalid data: {0}")]
    Invalid(String),
}

/// Errors from the motif enumeration oracle.
#[derive(Debug, Error)]
pub enum MotifError {
    #[error("pattern must be connected")]
    DisconnectedPattern,
    #[error("pattern must have between 2 and 4 nodes, got {0}")]
    PatternSize(usize),
    #[error("oracle guard: graph has {0} nodes, enumeration is capped at 64")]
    GraphTooLarge(usize),
}

/// Errors raised during training and evaluation.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite gradient in parameter '{0}'")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}, graph {graph}")]
    NonFiniteLoss { epoch: usize, graph: usize },
    #[error("empty index list for evaluation")]
    EmptyEvalSet,
    #[error("split produced an empty subset: {0}")]
    EmptySplit(&'static str),
    #[error("feature width mismatch: graph has {got}, model expects {expected}")]
    FeatureWidth { got: usize, expected: usize },
    #[error("node count mismatch: graph has {got}, model expects {expected}")]
    NodeCount { got: usize, expected: usize },
    #[error("invalid split fractions ({0}, {1}, {2}): must be nonnegative and sum to 1")]
    BadFractions(f64, f64, f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Errors from experiment config parsing.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Errors from parameter checkpoint files.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint does not match model: {0}")]
    Mismatch(String),
}
