//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid shape, size or parameter combination caught before any
    /// numerics run.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operators live on different lattice shapes")]
    ShapeMismatch,

    #[error("matrix block at site {site} is not unitary (defect {defect:.3e})")]
    NonUnitaryBlock { site: usize, defect: f64 },

    #[error("coin field does not cover site {site}")]
    MissingSite { site: usize },

    #[error("validation error: {0}")]
    Validation(String),

    /// A locality or dynamics query that would wrap around the torus.
    #[error("power {n} reaches around the torus of side {l}; result would be wrap-contaminated")]
    WrapAmbiguity { n: usize, l: usize },

    #[error("dimension {dim} exceeds the dense-solver limit {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("vector is not cyclic: Krylov matrix has relative rank defect {defect:.3e}")]
    NotCyclic { defect: f64 },

    #[error("window is not certified: {reason}")]
    NotCertified { reason: String },

    #[error("no eigenvalue of the truncation lies in the requested window")]
    EmptyWindow,

    #[error("degenerate trajectory: {0}")]
    DegenerateData(String),

    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}

pub type Result<T> = std::result::Result<T, Error>;
