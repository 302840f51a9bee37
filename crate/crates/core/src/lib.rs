//! Stochastic momentum methods for non-smooth, non-convex finite-sum coupled
//! compositional optimization (FCCO):
//!
//! ```text
//! min_w  F(w) = (1/n) * sum_i f_i(g_i(w)) + h0(w),    g_i(w) = E_xi[g_i(w; xi)]
//! ```
//!
//! where each outer `f_i` is Lipschitz and proximable but possibly non-smooth,
//! and each inner `g_i` is only reachable through mini-batch oracles.
//!
//! The crate is `no_std` (it needs `alloc`). It provides:
//!
//! * [`smoothing`]: the outer-function catalog with closed-form proximal maps,
//!   Moreau envelopes and envelope gradients.
//! * [`sonex`]: the single-loop tracker + momentum (or Adam-type) method on the
//!   outer-smoothed objective `F_lambda`, plus the plain SGD comparator.
//! * [`alexr2`]: the double-loop method that runs a primal-dual inner solver on
//!   the proximal subproblem of `F_lambda` and a momentum step on its Moreau
//!   envelope.
//! * [`penalty`]: the smoothed hinge-penalty front-end for inequality
//!   constrained problems, with KKT diagnostics.
//! * [`problems`]: synthetic and toy benchmark problems.
//! * [`metrics`]: exact objective/gradient evaluation, stationarity reports and
//!   the brute-force oracles used to check everything else.
//!
//! File formats, CLI and timing live in the companion `fcco` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod alexr2;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod penalty;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod smoothing;
pub mod sonex;
pub mod trace;

pub use error::{Error, Failure, Result};
pub use problem::{DecisionVector, FccoProblem, Regularity};
pub use rng::SeededRng;
pub use smoothing::OuterFunction;
pub use trace::{Monitor, SolverTrace, TraceRow};
