//! Construction and numerical verification of finite-dimensional
//! biorthogonal systems `(x_n, dual_n)` with `||x_n|| ||dual_n|| <= 1 + eps_n`.
//!
//! - [`coefficients`]: the `c`/`beta` sequences, `alpha`, and parameter selection.
//! - [`systems`]: truncated systems, the permutation-resistant system, block sums, file I/O.
//! - [`analysis`]: residuals, boundedness profiles, basis constants, frame bounds.
//! - [`permutations`]: orderings and the lower-bound witness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coefficients;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod permutations;
pub mod sparse;
pub mod systems;

pub use coefficients::{c_sequence, normalize_eps, CoefficientTable, EpsSpec, EpsilonSequence, Theorem2Params};
pub use error::{Error, Result};
pub use exec::Execution;
pub use permutations::Permutation;
pub use sparse::SparseVec;
pub use systems::BiorthogonalSystem;
