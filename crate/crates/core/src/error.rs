use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alpha {0}: must lie in [0, 1]")]
    InvalidAlpha(f64),

    #[error("invalid class count {0}: need 2 <= L <= {max}", max = crate::MAX_CLASSES)]
    InvalidClassCount(usize),

    #[error("invalid rho {rho} for L = {classes}: {reason}")]
    InvalidRho {
        rho: f64,
        classes: usize,
        reason: &'static str,
    },

    #[error("matrix is numerically singular (condition estimate {0:.3e})")]
    SingularMatrix(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),

    #[error("loss spec {kind} requires {what}")]
    InvalidLossSpec { kind: &'static str, what: &'static str },

    #[error("invalid temperature {0}: must be positive and finite")]
    InvalidTemperature(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dataset has no clean labels")]
    MissingCleanLabels,

    #[error("dataset already carries a noise mask")]
    AlreadyCorrupted,

    #[error("invalid percentile {0}: must lie in (0, 100]")]
    InvalidPercentile(f64),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("design matrix is singular (condition estimate {0:.3e})")]
    SingularDesign(f64),

    #[error("degenerate projection basis: spanning vectors are linearly dependent")]
    DegenerateBasis,

    #[error("degenerate model: {0}")]
    DegenerateModel(&'static str),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
