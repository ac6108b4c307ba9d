//! Random coding against sparse convolutive channels.
//!
//! A message `x ∈ ℝⁿ` is expanded into a codeword `Ax` by a random Gaussian
//! `m × n` matrix, sent through an unknown `k`-sparse channel `h` (circular
//! convolution), and both `x` and `h` are recovered from `y = h ⊗ Ax`.
//!
//! Two recovery routes are provided:
//! - [`am`]: alternating minimization, alternating a homotopy LASSO step for
//!   the channel ([`homotopy`]) with a least-squares step for the signal;
//! - [`block_l1`]: the lifted convex program over `U = x hᵀ`, solved by ADMM.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod am;
pub mod block_l1;
pub mod channel;
pub mod codec;
mod error;
pub mod experiment;
pub mod homotopy;
pub mod numerics;
pub mod rng;

pub use am::{align_scale, recover, AmConfig, InitMode, RecoveryResult, RecoveryStatus};
pub use block_l1::{solve_block_l1, BlockOperator, BlockSolution, BlockStatus};
pub use channel::{apply_channel, Channel, Received};
pub use codec::CodingMatrix;
pub use error::{Error, Result};
pub use homotopy::{solve_to_cardinality, CirculantOperator, HomotopyResult, HomotopyStatus};
pub use numerics::Matrix;
