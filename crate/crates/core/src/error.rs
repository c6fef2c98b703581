use std::time::Duration;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A bucket coordinate used in error reports: `(input_bucket, output_bucket)`.
pub type BucketId = (usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("record {index} ({input_tokens} in / {output_tokens} out) exceeds the bucket grid")]
    RecordOutOfGrid {
        index: usize,
        input_tokens: u32,
        output_tokens: u32,
    },

    #[error("request trace is empty")]
    EmptyTrace,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("bucket {0:?} is infeasible on {1}")]
    InfeasibleBucket(BucketId, String),

    #[error("no GPU type can serve buckets {buckets:?}")]
    GloballyInfeasible { buckets: Vec<BucketId> },

    #[error("{gpu}-only baseline cannot serve buckets {buckets:?}")]
    BaselineInfeasible { gpu: String, buckets: Vec<BucketId> },

    #[error("solver exceeded its {0:?} budget before proving optimality")]
    Timeout(Duration),

    #[error("instance too large to enumerate ({0:.3e} assignments)")]
    TooLarge(f64),

    #[error("no instance can serve bucket {0:?}")]
    NoFeasibleInstance(BucketId),

    #[error("simulation result has no samples")]
    EmptyResult,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
