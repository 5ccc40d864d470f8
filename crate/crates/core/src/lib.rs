//! Numerical realization of Calderón reproducing formulas, spectral functional
//! calculi, tent spaces and Hardy-space atom/molecule machinery on finite
//! discretizations of self-adjoint operators.
//!
//! Everything acts on a finite metric measure space: integrals become weighted
//! sums, operators become matrices with explicit spectral data, and every
//! estimate of interest (off-diagonal decay, reproducing error, atom bounds)
//! becomes a computable number with a checkable margin.
//!
//! Module map:
//! - [`mspace`]: finite metric measure spaces, balls, tents, cones, doubling.
//! - [`specop`]: model self-adjoint operators with full spectral data.
//! - [`profiles`]: the holomorphic and band-limited function classes.
//! - [`calculus`]: calculus engines, the unitary group, propagation speed,
//!   and the off-diagonal probe suite.
//! - [`calderon`]: Calderón partner construction and reproducing formulas.
//! - [`tent`]: tent fields, `T^p` norms, atomic decomposition.
//! - [`hardy`]: Q/S operators, Hardy atoms and molecules, model bridges.
//! - [`driver`]: config-driven experiment runner backing the CLI.

pub mod calculus;
pub mod calderon;
pub mod driver;
pub mod hardy;
pub mod mspace;
pub mod profiles;
pub mod quad;
pub mod specop;
pub mod tent;

use thiserror::Error;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Errors surfaced by model builders, calculus engines and probes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("evaluation error at eigenvalue {eigenvalue}: {reason}")]
    Evaluation { eigenvalue: f64, reason: String },

    #[error("resolvent point {z} is within {dist:e} of eigenvalue {eigenvalue}")]
    NearSingular { z: C64, eigenvalue: f64, dist: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("profile error: {0}")]
    Profile(String),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("calculus engines disagree: {0}")]
    EngineMismatch(String),

    #[error("contour quadrature cannot reach tolerance: {0}")]
    ContourResolution(String),

    #[error("quadrature grid too narrow: estimated tail {tail:e} exceeds budget {budget:e}")]
    GridTooNarrow { tail: f64, budget: f64 },

    #[error("log grid does not cover eigenvalue {eigenvalue}: {reason}")]
    GridCoverage { eigenvalue: f64, reason: String },

    #[error("incompatible tent fields: {0}")]
    IncompatibleFields(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("config error at {pointer}: {reason}")]
    Config { pointer: String, reason: String },

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
