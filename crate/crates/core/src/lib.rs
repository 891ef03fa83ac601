//! Photon-number statistics of multimode Gaussian states.
//!
//! The crate covers three related computations on continuous-variable
//! quantum states, all at double precision and all deterministic:
//!
//! - [`gaussian_state`] represents multimode Gaussian states by their mean
//!   quadrature vector and dispersion matrix, with constructors, physicality
//!   validation, symplectic transformations, and moment-level quantities.
//! - [`photon_distribution`] assembles the joint photon-number distribution
//!   of a Gaussian state from the vacuum probability and a lattice of
//!   multidimensional Hermite polynomial values supplied by [`hermite`];
//!   [`fock_oracle`] provides independent brute-force probabilities for
//!   small systems via phase-space overlap quadrature.
//! - [`q_planck`] evaluates the thermal occupation of the q-deformed
//!   oscillator both exactly (partition sum) and through a second-order
//!   closed formula; [`floquet`] integrates time-periodic quadratic
//!   Hamiltonians at the symplectic level and extracts monodromy phases,
//!   conjugacy classes, and effective Hamiltonians.
//!
//! The [`cli`] module wires everything into the `photondist` binary with
//! reproducible CSV/JSON-lines output.
//!
//! Quadrature ordering is fixed crate-wide as `(p_1..p_N, q_1..q_N)`;
//! every matrix and vector follows it.

pub mod cli;
pub mod floquet;
pub mod fock_oracle;
pub mod gaussian_state;
pub mod hermite;
pub mod photon_distribution;
pub mod q_planck;

use thiserror::Error;

/// Crate-wide error type. Every failure carries enough context to act on:
/// offending values, measured residuals, and the limit that was violated.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument is outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A state document or state value violates a structural or physical
    /// constraint.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A matrix that must be inverted is singular or near-singular.
    #[error("singular matrix ({matrix}): {context}")]
    Singular { matrix: String, context: String },

    /// A real principal matrix logarithm does not exist for the input.
    #[error("no principal logarithm: {0}")]
    NoPrincipalLog(String),

    /// A guarded resource budget (lattice size, term count, grid size)
    /// would be exceeded.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// A numerical-accuracy target could not be met; the message reports
    /// the measured value.
    #[error("accuracy: {0}")]
    Accuracy(String),

    /// An I/O operation failed.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A document could not be parsed.
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-parseable code for CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidState(_) => "invalid-state",
            Error::Singular { .. } => "singular-matrix",
            Error::NoPrincipalLog(_) => "no-principal-log",
            Error::ResourceLimit(_) => "resource-limit",
            Error::Accuracy(_) => "accuracy",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }

    /// Process exit code: 3 for numerical-accuracy failures, 2 for
    /// validation and environment failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Accuracy(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
