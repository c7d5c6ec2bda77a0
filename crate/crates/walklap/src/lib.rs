//! Walk-based graph Laplacians for diffusion on networks.
//!
//! Provides the family of Laplacian-like operators built from walk counts:
//! the classical `L = D - A`, k-walk Laplacians `diag(A^k 1) - A^k`,
//! transformed Laplacians `diag(f(A)1) - f(A)`, their nonbacktracking and
//! backtrack-downweighted variants, and the shortest-path based k-path
//! Laplacian as a dense baseline. On top of the operators sit continuous
//! diffusion, discrete Markov chains, and exact/randomized average
//! return-probability estimators backed by Krylov subspace machinery
//! (Lanczos/Arnoldi matrix functions, PCG, MINRES, AAA rational
//! approximation, block rational Arnoldi).
//!
//! All operators are matrix-free: an apply costs a handful of sparse
//! matrix-vector products or inner Krylov solves, never a dense build.
//! Dense materialization is available below [`DENSE_LIMIT`] for
//! cross-checks and small-graph experiments.

pub mod dense;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod krylov;
pub mod operators;
pub mod returnprob;
pub mod spectral;
pub mod walks;

pub use error::{Error, Result};
pub use graph::Graph;
pub use operators::{CoefficientFunction, LaplacianOperator};

/// Default node-count limit for dense materialization, walk-count matrices,
/// and dense eigendecompositions. Shared by every module; operations that
/// need a dense representation fail above it.
pub const DENSE_LIMIT: usize = 4096;
