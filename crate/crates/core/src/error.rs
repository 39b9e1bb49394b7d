use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("zero-variance column {0}")]
    ZeroVarianceColumn(usize),

    #[error("no penalized column with positive weight")]
    NoPenalizedColumns,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty tau grid")]
    EmptyTauGrid,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate regime norm ratio")]
    DegenerateRatio,

    #[error("singular Σ(τ): τ must lie strictly between 0 and 1, got {0}")]
    SingularSigmaTau(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("too many failed replications: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("panel: {0}")]
    Panel(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
