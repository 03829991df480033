use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected {expected} unconstrained parameters, got {got}")]
    ParamLength { expected: usize, got: usize },

    #[error("observed information is not invertible: {0}")]
    SingularInformation(String),

    #[error("estimating equation has no sign change on [{a}, {b}]")]
    NotBracketed { a: f64, b: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("degenerate slope: {0}")]
    DegenerateSlope(String),

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Toml(_)
                | Error::InvalidParameter(_)
                | Error::ParamLength { .. }
                | Error::Domain(_)
        )
    }
}
