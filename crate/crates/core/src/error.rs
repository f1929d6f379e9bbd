use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("non-finite value for sample {sample}: {detail}")]
    Data { sample: usize, detail: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("underdetermined least-squares fit: {samples} samples for {unknowns} unknowns")]
    Underdetermined { samples: usize, unknowns: usize },
    #[error(
        "ill-conditioned normal equations (condition estimate {condition:.3e}); \
         retry with a ridge regularization of at least {suggested_ridge:.1e}"
    )]
    IllConditioned { condition: f64, suggested_ridge: f64 },
    #[error("numerical blowup at iteration {iteration}, sample {sample}, grid index {grid}: {detail}")]
    NumericalBlowup {
        iteration: usize,
        sample: usize,
        grid: usize,
        detail: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
