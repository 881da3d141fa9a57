use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("impact location {tau} is not within half a grid step of any grid point")]
    Location { tau: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("data must be centered before {0}")]
    NotCentered(&'static str),

    #[error("invalid window: {0}")]
    Window(String),

    #[error("degenerate window at t={t}: variance of the local statistic is {variance:e}")]
    DegenerateWindow { t: f64, variance: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("subset enumeration needs {required} fits, budget is {budget}; use a smaller candidate pool or max_vars")]
    Budget { required: u128, budget: u128 },

    #[error(
        "covariance factorization failed at pivot index {index} (t={t}, diagonal {diagonal:e})"
    )]
    Factorization { index: usize, t: f64, diagonal: f64 },

    #[error("response column required")]
    MissingResponse,

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by the command line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidSpec(_) | Error::Config(_) | Error::Window(_) | Error::Budget { .. } => {
                ErrorCategory::Usage
            }
            Error::Dimension(_)
            | Error::Location { .. }
            | Error::InsufficientData(_)
            | Error::NotCentered(_)
            | Error::MissingResponse
            | Error::Format(_)
            | Error::Parse { .. }
            | Error::Io(_) => ErrorCategory::Data,
            Error::DegenerateWindow { .. }
            | Error::DegenerateData(_)
            | Error::SingularDesign(_)
            | Error::Factorization { .. } => ErrorCategory::Numerical,
        }
    }

    /// Short stable tag, suitable for machine parsing.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Dimension(_) => "dimension",
            Error::Location { .. } => "location",
            Error::InsufficientData(_) => "insufficient-data",
            Error::NotCentered(_) => "not-centered",
            Error::Window(_) => "window",
            Error::DegenerateWindow { .. } => "degenerate-window",
            Error::DegenerateData(_) => "degenerate-data",
            Error::SingularDesign(_) => "singular-design",
            Error::Budget { .. } => "budget",
            Error::Factorization { .. } => "factorization",
            Error::MissingResponse => "missing-response",
            Error::Format(_) => "format",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
