//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("query matches no document")]
    EmptyUniverse,

    #[error("query has no keywords")]
    EmptyQuery,

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cluster count {k} out of range for universe of {n}")]
    ClusterCount { k: usize, n: usize },

    #[error("cluster ground truth is empty")]
    EmptyCluster,

    #[error("zero-norm vector has no direction")]
    ZeroVector,

    #[error("pool of {0} keywords is too large for exhaustive search (limit 20)")]
    PoolTooLarge(usize),

    #[error("need at least two sample points, got {0}")]
    TooFewSamples(usize),

    #[error("no f-measures to aggregate")]
    NoScores,

    #[error("keyword `{keyword}` {reason}")]
    BadMove { keyword: String, reason: String },

    #[error("{0}")]
    InvalidConfig(String),
}
