use thiserror::Error;

/// Errors raised across the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid tolerance {0}: must be finite and nonnegative")]
    Tolerance(f64),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("singular geometry: source and field points coincide")]
    Singularity,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precoder degeneracy in block {block}: {reason}")]
    Degenerate { block: String, reason: String },

    #[error("capacity exceeded: user {user} in polarization {pol} has an empty interference null space")]
    CapacityExceeded { pol: char, user: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
