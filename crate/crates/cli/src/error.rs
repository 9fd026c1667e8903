use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config error: invalid value for \"{key}\": {message}")]
    Invalid { key: String, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn invalid(key: &str, message: impl ToString) -> Self {
        CliError::Invalid {
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid { .. } => crate::EXIT_CONFIG,
            CliError::Io { .. } | CliError::Csv { .. } => crate::EXIT_IO,
        }
    }
}
