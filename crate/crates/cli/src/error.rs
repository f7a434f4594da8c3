use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{0}")]
    Truncated(String),

    #[error(transparent)]
    Geo(#[from] slngeo::GeoError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Truncated(_) => 4,
            CliError::Geo(_) | CliError::Io(_) => 1,
        }
    }
}

/// Constructor failures on user data are validation errors.
pub fn invalid(what: &str, e: slngeo::GeoError) -> CliError {
    CliError::Validation(format!("{what}: {e}"))
}
