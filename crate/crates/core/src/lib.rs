//! Boundary-function asymptotics for singularly perturbed
//! differential-algebraic boundary value problems
//!
//! ```text
//! ε A(t, ε) x' = f(x, t, ε),   0 ≤ t ≤ T,
//! M x(0, ε) + N x(T, ε) = d(ε),
//! ```
//!
//! where `A(0, 0)` is singular (a turning point at `t = 0`) and `A(t, 0)` is
//! invertible on `(0, T]`.
//!
//! The crate builds the expansion
//! `Σ ε^k (x̄_k(t) + Π_k x(t/ε) + Q_k x((t−T)/ε))` term by term, and provides a
//! stiff collocation solver for the full problem so that the expansion error
//! can be measured. It is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod expansion;
pub mod jet;
pub mod layer;
mod linalg;
pub mod matching;
pub mod pencil;
pub mod problem;
pub mod problems;
pub mod reference;
pub mod regular;
pub mod validate;

pub use error::{Error, Result};
pub use jet::{Jet, JetVector};
pub use linalg::loglog_slope;
pub use problem::{BoundaryData, BvpProblem, EpsSeriesMatrix, Side, VectorField};
