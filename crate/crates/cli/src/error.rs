use thiserror::Error;

/// Command failures, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("schema error: {0}")]
    Schema(String),
}

impl CliError {
    pub const EXIT_CONFIG: i32 = 3;
    pub const EXIT_IO: i32 = 4;
    pub const EXIT_SCHEMA: i32 = 5;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Io(_) => Self::EXIT_IO,
            CliError::Schema(_) => Self::EXIT_SCHEMA,
        }
    }
}

impl From<xsplit::Error> for CliError {
    fn from(e: xsplit::Error) -> Self {
        match e {
            xsplit::Error::Io(_) => CliError::Io(e.to_string()),
            xsplit::Error::Parse { .. } | xsplit::Error::Format { .. } => CliError::Schema(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
