use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter record or config file is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// The truncated chain did not converge when `n_max` was enlarged.
    #[error(
        "truncation did not converge: phi({n_max}) = {phi_at_n_max} Mb/s, \
         phi({n_max_next}) = {phi_at_next} Mb/s (relative change {residual:.3e})"
    )]
    Truncation {
        n_max: usize,
        n_max_next: usize,
        phi_at_n_max: f64,
        phi_at_next: f64,
        residual: f64,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
