//! Distributed estimation of a graph matrix's eigenvalue spectrum.
//!
//! Nodes of a connected undirected graph each know one row of a matrix `W`
//! conforming to the graph's sparsity pattern. They cooperate in two stages:
//!
//! 1. [`stage1`] — run the synchronous iteration `y(t+1) = W y(t)` for `N`
//!    rounds over a simulated message bus; each node keeps its scalar history,
//!    which forms its private row of a linear system `A x* = b` whose solution
//!    is the vector of characteristic-polynomial coefficients of `W`.
//! 2. [`stage2`] — integrate a continuous-time consensus flow that drives
//!    every node's local estimate to `x*`, with a Lyapunov function `V`
//!    certifying monotone convergence.
//!
//! Each node then reads off eigenvalue estimates as the roots of its
//! coefficient polynomial ([`spectrum`]). When the Krylov matrix `A` may be
//! singular (e.g. `W` is an adjacency matrix with repeated eigenvalues),
//! nodes first apply a small decentralized random perturbation to their rows
//! ([`perturb`]), trading exactness for almost-sure solvability.
//!
//! [`linalg`] supplies the centralized reference computations (characteristic
//! polynomial, rank, solve, conditioning) used as oracles and diagnostics;
//! the distributed pipeline itself never calls them. [`config`] and
//! [`runner`] wire everything into reproducible file-driven runs.

pub mod config;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod perturb;
pub mod runner;
pub mod spectrum;
pub mod stage1;
pub mod stage2;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
