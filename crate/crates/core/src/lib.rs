//! Bradley-Terry maximum likelihood in the log-strength (β) parameterization
//! under arbitrary linear identifying constraints `αᵀβ = 0`.
//!
//! The crate is organised bottom-up:
//!
//! - [`pairdata`]: count matrices, CSV/JSON I/O and the strong-connectivity
//!   check that decides whether the constrained MLE exists.
//! - [`likelihood`]: log-likelihood, gradient and Hessian kernels.
//! - [`solver`]: Newton fit under the sum constraint, the map to any other
//!   admissible constraint, and the `w ↔ β` conversions.
//! - [`inference`]: variance estimates from the pseudoinverse of the negative
//!   Hessian, their transport to other constraints, and the trace comparison.
//! - [`simulate`]: the subject-based data generating design and Monte Carlo
//!   experiments for consistency, coverage and uncertainty concentration.

pub mod inference;
pub mod likelihood;
pub mod pairdata;
pub mod simulate;
pub mod solver;

pub use inference::{InferenceError, Interval, VarianceEstimate};
pub use likelihood::{LikelihoodError, ScoreVector};
pub use pairdata::{ComparisonData, ConnectivityReport, PairDataError};
pub use solver::{Constraint, FitOptions, FitResult, SolverError};
