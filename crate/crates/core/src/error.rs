use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("agent {agent}: {reason}")]
    InvalidType { agent: usize, reason: String },

    #[error("invalid reward scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid profile at agent {agent}: {reason}")]
    InvalidProfile { agent: usize, reason: String },

    #[error("agent index {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("scheme is not proper for this population: {0}")]
    Improper(String),

    #[error("delegation total {total} outside [{min}, {max}]")]
    InfeasibleAllocation { total: f64, min: f64, max: f64 },

    #[error("strategy is not ex post stable for this draw")]
    Unstable,

    #[error("{k} pools exceed the exact enumeration limit of {limit}; use the FPTAS")]
    TooManyPools { k: usize, limit: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("draw {draw}: {source}")]
    Draw {
        draw: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
