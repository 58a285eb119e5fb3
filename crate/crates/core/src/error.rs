use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    Convergence { estimate: f64, error_bound: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("threshold out of range: coverage level {level} not reached on [{lo}, {hi}]")]
    OutOfRange { level: f64, lo: f64, hi: f64 },

    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("empty network: no base station after {attempts} resamples")]
    EmptyNetwork { attempts: usize },
}

impl Error {
    pub fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Convergence { .. } => "convergence",
            Error::Numerical(_) => "numerical",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::EmptyNetwork { .. } => "empty_network",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
