use thiserror::Error;

/// Harness failures, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing configuration and inputs; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Anything that fails after the inputs were accepted; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ortholoc_core::Error> for CliError {
    fn from(e: ortholoc_core::Error) -> Self {
        use ortholoc_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
