use thiserror::Error;

/// Error categories. Each maps onto a CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("admissibility violation: {0}")]
    Admissibility(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver diverged: {0}")]
    Diverged(String),
    #[error("fixed point did not converge: {0}")]
    NoConvergence(String),
    #[error("inequality violated: {0}")]
    Inequality(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("argument outside the configuration domain: {0}")]
    OutOfDomain(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Inequality(_) | Error::Io { .. } => 1,
            Error::Config(_) => 2,
            Error::Diverged(_) | Error::NoConvergence(_) | Error::Quadrature(_) | Error::OutOfDomain(_) => 3,
            Error::Admissibility(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::Admissibility(_) => "admissibility",
            Error::Config(_) => "config",
            Error::Diverged(_) => "diverged",
            Error::NoConvergence(_) => "no-convergence",
            Error::Inequality(_) => "inequality",
            Error::Quadrature(_) => "quadrature",
            Error::OutOfDomain(_) => "out-of-domain",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
