//! Crate-wide error type.

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("site count mismatch: {left} vs {right}")]
    SiteMismatch { left: usize, right: usize },

    #[error("dense realization cap exceeded: {n_sites} sites > cap {cap}")]
    DenseCapExceeded { n_sites: usize, cap: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("chain length {0} too short (need at least 2 sites)")]
    ChainTooShort(usize),

    #[error("enumeration too large: {work} tuples exceeds cap {cap}")]
    EnumerationCap { work: u128, cap: u128 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("moment order {0} out of supported range")]
    BadMomentOrder(u32),

    #[error("spectrum has zero variance")]
    ZeroVariance,

    #[error("degenerate energy range (all energies equal)")]
    DegenerateRange,

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid factorization: {d_a} x {d_b} != {len}")]
    BadFactorization { d_a: usize, d_b: usize, len: usize },

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("state norm violated: |1 - ||psi||^2| = {0:.3e}")]
    NormViolation(f64),

    #[error("diagonals are not rearrangements of the same spectrum (max deviation {0:.3e})")]
    MultisetMismatch(f64),

    #[error("non-positive temperature {0}")]
    NonPositiveTemperature(f64),

    #[error("E(T) not strictly increasing at grid index {0}; refine the temperature grid")]
    NonMonotoneEnergy(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
