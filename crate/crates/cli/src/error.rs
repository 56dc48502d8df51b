use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("operation failed ({class}): {message}")]
    OperationFailed { class: &'static str, message: String },

    #[error("unknown suite {0:?}")]
    UnknownSuite(String),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::OperationFailed { .. } => "OperationFailed",
            CliError::UnknownSuite(_) => "UnknownSuite",
            CliError::Io { .. } => "Io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) | CliError::UnknownSuite(_) => 2,
            CliError::OperationFailed { .. } | CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

/// Errors raised while building inputs from the config.
pub fn invalid(e: horocell::Error) -> CliError {
    CliError::ConfigInvalid(e.to_string())
}

/// Errors raised by the operation itself.
pub fn failed(e: horocell::Error) -> CliError {
    CliError::OperationFailed { class: e.class(), message: e.to_string() }
}
