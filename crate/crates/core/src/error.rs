use thiserror::Error;

/// Errors raised by the model, equalizers and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported constellation `{0}` (expected bpsk, qpsk or 16qam)")]
    UnsupportedConstellation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Gram matrix is singular; zero forcing needs full column rank (use fewer users than antennas, U < B)")]
    SingularGram,

    #[error("non-finite value at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("cluster {cluster}: {source}")]
    Cluster {
        cluster: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no bracket for the fixed point below {limit:e}")]
    NoBracket { limit: f64 },

    #[error("state evolution did not converge within {iterations} iterations (last iterate {last})")]
    NotConverged { iterations: usize, last: f64 },

    #[error("FD variance {sigma2_fd} is below PD variance {sigma2_pd}")]
    OrderingViolated { sigma2_pd: f64, sigma2_fd: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
