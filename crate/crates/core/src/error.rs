/// Crate-wide error type.
///
/// Variants are grouped by how a caller should react: configuration and
/// domain errors indicate bad inputs, parse errors a malformed file, fit and
/// solver errors a numerical failure.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid configuration (bad parameter values, stability bound, ...).
    Config(String),
    /// Operation precondition violated (bad footprint, profile bounds, ...).
    Domain(String),
    /// Malformed input file; the message names the offending location.
    Parse(String),
    /// Identification failure (rank deficiency, too little data, ...).
    Fit(String),
    /// QP solver failure (nonconvergence, non-positive-definite Hessian).
    Solver(String),
    /// Underlying I/O failure.
    Io(String),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
            Error::Fit(m) => write!(f, "fit error: {m}"),
            Error::Solver(m) => write!(f, "solver error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Shorthand result alias used throughout the crate.
pub type Result<V> = std::result::Result<V, Error>;
