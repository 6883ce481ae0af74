use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request is valid but the chosen method cannot serve it.
    #[error("capability error: {0}")]
    Capability(String),

    /// Malformed or inconsistent input data (body specs, densities, samples).
    #[error("data error: {0}")]
    Data(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iters} iterations (last gap {gap:e})")]
    Solver {
        iters: usize,
        gap: f64,
        /// Row-major matrix of the last iterate.
        last: Vec<f64>,
    },

    #[error("sandwich certificate violated in direction {direction:?}: ratio {ratio} outside [{lower}, {upper}]")]
    Certificate { direction: Vec<f64>, ratio: f64, lower: f64, upper: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
