//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by scenario loading, the physical-layer model and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario field violates one of its invariants.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// The scenario file could not be parsed against the documented schema.
    #[error("scenario schema error: {0}")]
    Schema(String),

    /// An operation was called outside its domain (e.g. a SINR cross-term
    /// for users that do not share a codebook).
    #[error("domain error: {0}")]
    Domain(String),

    /// A request is structurally infeasible (e.g. more codebooks than
    /// distinct subcarrier subsets exist).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An exhaustive oracle refused because the search space is too large.
    #[error("oracle refusal: {0}")]
    OracleRefusal(String),

    /// The closed-form power update had a zero denominator for an entry with
    /// a nonzero numerator, which signals multiplier misconfiguration.
    #[error("unbounded power update for cell {cell}, user {user}, codebook {codebook}")]
    UnboundedPowerUpdate {
        cell: usize,
        user: usize,
        codebook: usize,
    },

    /// File-system or serialization failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code mandated for this error class: 1 for validation
    /// problems, 2 for I/O problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
