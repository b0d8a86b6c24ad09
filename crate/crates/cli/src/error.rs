use thiserror::Error;

/// Failures of a CLI run, each mapped to its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// Numerical breakdown or a rejected covariance model.
    #[error("{0}")]
    Model(String),

    #[error("{0}")]
    Budget(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_STATISTICAL_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_MODEL: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Model(_) => EXIT_MODEL,
            CliError::Budget(_) => EXIT_BUDGET,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

impl From<gexr_core::Error> for CliError {
    fn from(e: gexr_core::Error) -> Self {
        use gexr_core::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Budget { .. } => CliError::Budget(e.to_string()),
            E::OutOfRange { .. } | E::ModelRejected(_) | E::Numerical(_) => CliError::Model(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
