use thiserror::Error;

/// Errors raised by model construction, simulation and estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A variance function was queried outside its declared range.
    #[error("variance function evaluated outside its range at t = {t} (range {lo}..={hi})")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    /// A covariance model failed a nonnegative-definiteness check.
    #[error("model rejected: {0}")]
    ModelRejected(String),

    /// A numerical procedure broke down (negative circulant spectrum, overflow, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A grid or replication budget was exceeded.
    #[error("budget exceeded: {what} = {requested} > {limit}")]
    Budget {
        what: &'static str,
        requested: usize,
        limit: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
