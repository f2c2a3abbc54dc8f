//! # qig-core
//!
//! A numerical workbench for quantum information geometry on
//! finite-dimensional truncations.
//!
//! States are Gibbs densities `rho = exp(-H) / Z` of Hamiltonians `H >= I`.
//! Moving through state space means perturbing the generator: `H -> H + X`
//! for a symmetric `X` that is *small* in one of three resolvent-weighted
//! norms. This crate builds that picture as running code:
//!
//! - [`linalg`] — dense Hermitian spectral kernel: eigendecomposition,
//!   matrix functions (exp, log, real powers), operator norms.
//! - [`perturbation`] — the omega-, zero- and epsilon-norms of a
//!   perturbation at a base Hamiltonian, relative form bounds, smallness.
//! - [`gibbs`] — perturbed Gibbs states, partition functions and free
//!   energy, the regularized mean, trace-tail and p-summability
//!   diagnostics under truncation.
//! - [`manifold`] — charts and hoods, the identity-shift quotient,
//!   centered scores, norms at shifted base points, and atlas extension.
//! - [`geometry`] — the flat exponential affine structure: (+1)-mixtures,
//!   path-independent parallel transport, and the contrasting
//!   (-1)-mixture of densities.
//! - [`models`] — seeded generators of base Hamiltonians and perturbation
//!   families (oscillator ladder, discrete 1D Laplacian, random SPD).
//!
//! All matrices are real symmetric and dense; every value is immutable
//! after construction and safe to share across threads.

use thiserror::Error;

pub mod geometry;
pub mod gibbs;
pub mod linalg;
pub mod manifold;
pub mod models;
pub mod perturbation;

pub use linalg::{HermitianOperator, MatrixFunction, SpectralDecomposition};
pub use perturbation::{BasePoint, BasePointId, NormKind, PerturbationNorms, RelativeBound};


/// Errors for spectral and geometric computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },

    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    DecompositionFailed { dim: usize },

    #[error("{function} is undefined on this spectrum: eigenvalue {eigenvalue:e} at index {index}")]
    SpectrumDomain {
        function: &'static str,
        index: usize,
        eigenvalue: f64,
    },

    #[error("{name} = {value} out of range, expected {expected}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("base Hamiltonian must satisfy H >= I: min eigenvalue {min_eigenvalue}")]
    NotBoundedBelowByOne { min_eigenvalue: f64 },

    #[error("b grid must be nonempty, nonnegative and ascending")]
    InvalidBoundGrid,

    #[error("perturbation is not small: centered zero-norm {norm} >= hood radius {radius}")]
    PerturbationTooLarge { norm: f64, radius: f64 },

    #[error("hood radius exceeded: score zero-norm {norm} >= {radius}")]
    HoodRadiusExceeded { norm: f64, radius: f64 },

    #[error("atlas extension rejected: step zero-norm {norm} >= 1 - beta = {radius}")]
    ExtensionRejected { norm: f64, radius: f64 },

    #[error("value belongs to base point {found}, expected {expected}")]
    BaseMismatch { expected: u64, found: u64 },

    #[error("path endpoints do not match the transport endpoints")]
    PathEndpointMismatch,

    #[error("generated perturbation direction is zero and cannot be scaled")]
    ZeroDirection,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("atlas document is inconsistent: {0}")]
    AtlasDocument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
