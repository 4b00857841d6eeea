use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// The variants map onto distinct process exit codes in the CLI: domain and
/// configuration problems, capability/capacity limits, and numerical
/// non-convergence are reported separately so callers can react to them.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is valid but of a class this implementation does not handle.
    #[error("capability error: {0}")]
    Capability(String),

    /// A resource limit was exceeded (grid too large, shift leaves the grid).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// An iterative or adaptive procedure failed to reach its tolerance.
    #[error("did not converge: {what} (residual {residual:.3e})")]
    NonConvergence { what: String, residual: f64 },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
