//! Error type shared across the library.

use std::fmt;

/// Errors produced by library operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    Domain(String),
    /// An enumeration, member-count or quadrature budget was exceeded.
    /// `reached` is the count at which the operation gave up.
    Budget { what: String, limit: u64, reached: u64 },
    /// The Gramian is numerically singular; the fit is meaningless.
    RankDeficient { min_eig: f64 },
    /// An encoding payload cannot be decoded into a downward closed set
    /// of the declared size.
    MalformedEncoding(String),
    /// Parameters outside the cases the operation supports.
    Unsupported(String),
    /// Argument dimensions do not match.
    Dimension(String),
    /// A minimal sample size exceeds the representable range; carries the
    /// right-hand side that forced it.
    Overflow { rhs: f64 },
    /// Greedy selection ran out of admissible candidates before reaching
    /// the target cardinality.
    Stall { reached: usize, target: usize },
    /// An iterative solve failed to converge.
    Convergence(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Budget { what, limit, reached } => {
                write!(f, "budget exceeded for {what}: limit {limit}, reached {reached}")
            }
            Error::RankDeficient { min_eig } => {
                write!(f, "rank-deficient system: smallest Gramian eigenvalue {min_eig:e}")
            }
            Error::MalformedEncoding(msg) => write!(f, "malformed encoding: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported parameters: {msg}"),
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::Overflow { rhs } => {
                write!(f, "minimal sample size overflows u64 (right-hand side {rhs:e})")
            }
            Error::Stall { reached, target } => {
                write!(f, "selection stalled at cardinality {reached} of {target}")
            }
            Error::Convergence(msg) => write!(f, "convergence failure: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
