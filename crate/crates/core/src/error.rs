use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("column {0:?} not found")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column {column:?}: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column {0:?} has zero variance; cannot standardize")]
    ZeroVariance(String),

    #[error("column {column:?} has non-positive value {value} at row {row}; cannot log-transform")]
    NonPositiveUnderLog {
        column: String,
        value: f64,
        row: usize,
    },

    #[error("matrix not positive definite (leading minor {minor}); {context}")]
    NotPositiveDefinite { minor: usize, context: String },

    #[error("symmetric eigendecomposition failed (LAPACK info {info})")]
    EigenFailed { info: i32 },

    #[error("rank-deficient design; near-collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("non-finite draw at iteration {iteration}: {details}")]
    NonFiniteDraw { iteration: usize, details: String },

    #[error("numerical overflow in sampler state: {0}")]
    SamplerOverflow(String),

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
