//! Numerical laboratory for Schatten-norm compression inequalities on block
//! matrices.
//!
//! * [`matrix`] and [`schatten`]: dense complex matrices, singular values,
//!   Schatten / Ky Fan norms, Hadamard and polar powers, dual witnesses.
//! * [`blockmat`]: block grids, norm compression, the Gram form and the
//!   diagonal-block reduction.
//! * [`ineq`]: one checker per inequality, each returning an [`IneqReport`].
//! * [`analysis`]: the function `g_p`, its derivative and the boundary study.
//! * [`search`]: seeded random ensembles, violation search with hill-climb
//!   refinement, variational probing and the reproduction cases.

pub mod analysis;
pub mod blockmat;
pub mod error;
pub mod ineq;
pub mod matrix;
pub mod rng;
pub mod schatten;
pub mod search;

pub use blockmat::{assemble, compress, BlockMatrix, CompressionResult, GramForm};
pub use error::{Error, Result};
pub use ineq::{Direction, IneqReport, Scope, UiNorm};
pub use matrix::DenseMatrix;
pub use schatten::{schatten_norm, SchattenOrder};

/// Relative tolerance for equality claims.
pub const DEFAULT_TOL: f64 = 1e-9;
