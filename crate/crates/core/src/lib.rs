//! Quadratic Wasserstein distances `W` and `W_σ` between finite-dimensional
//! noncommutative dynamical systems.
//!
//! A system is a faithful state on `M_n` together with a family of unital
//! completely positive maps that leave the state invariant. Couplings between
//! two states are represented by the channel `E` they induce (Choi form), and
//! the distances are obtained by minimizing an affine transport cost over the
//! couplings whose channel intertwines the two dynamics.
//!
//! Module layout, bottom-up:
//!
//! * [`linalg`]: dense complex matrix kernel.
//! * [`qstate`]: faithful states and their modular structure.
//! * [`channel`]: u.c.p. maps, KMS-duals, conditional expectations, reduction.
//! * [`coupling`]: transport plans and the plan/channel correspondence.
//! * [`systems`]: generalized, composite, augmented and reduced systems.
//! * [`balance`]: affine constraint systems on Choi coordinates.
//! * [`cost`]: the transport cost and its affine coefficients.
//! * [`solver`]: ADMM solver, the 2×2 oracle, and the distance entry points.
//! * [`suites`]: randomized property suites shared by tests and the CLI.

pub mod balance;
pub mod channel;
pub mod cost;
pub mod coupling;
mod error;
pub mod linalg;
pub mod qstate;
pub mod solver;
pub mod suites;
pub mod systems;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
