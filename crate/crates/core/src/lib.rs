//! Bipartite separability testing by cutting planes over entanglement witnesses.
//!
//! Given a density matrix `ρ` on `C^M ⊗ C^N` and a precision `δ`, [`solve`]
//! either asserts that `ρ` is within `δ` of a separable state or returns a
//! traceless, unit-norm witness `A` whose support value over the separable set
//! stays below `tr(Aρ) + δ`.
//!
//! Modules:
//! - [`hermitian`]: the real operator space, its canonical basis, partial
//!   transposes and eigen-utilities.
//! - [`states`]: product states, their chart, and standard test families.
//! - [`oracle`]: the support oracle over pure product states.
//! - [`cutting_plane`]: the analytic-center cutting-plane loop.
//! - [`verifiers`]: PPT test, Frank–Wolfe nearest separable state, witness
//!   validation, and the brute-force grid algorithm.
//! - [`partial_info`]: witness search restricted to measured observables.
//! - [`io`]: JSON schemas shared with the command-line tool.
//! - [`cli`]: the `sepwit` command-line front end.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cutting_plane;
pub mod error;
pub mod hermitian;
pub mod io;
pub mod oracle;
pub mod partial_info;
pub mod states;
pub mod verifiers;

pub use cutting_plane::{solve, SolverConfig, Verdict, VerdictKind};
pub use error::{Error, Result};
pub use hermitian::{Dims, DensityMatrix, HermitianOp, OperatorBasis, Subsystem};
pub use states::{ProductState, SeparableDecomposition};
