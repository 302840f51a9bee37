//! Benchmark problems: synthetic FCCO instances, CVaR group DRO, and small
//! constrained toys for the penalty front-end.

use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::FccoProblem;
use crate::rng::SeededRng;

pub mod constrained;
pub mod gdro;
pub mod roc;
pub mod synthetic;

pub use constrained::{make_toy_constrained, ToyConstrained, ToyKind};
pub use gdro::{make_gdro_cvar, GdroCvar, GdroSpec};
pub use roc::{make_roc_fairness_toy, RocFairness, RocSpec};
pub use synthetic::{make_synthetic_fcco, InnerFamily, SyntheticFcco, SyntheticSpec};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `max |sigma''|`, attained at `x = ln(2 +- sqrt 3)`.
pub(crate) const SIGMOID_CURVATURE: f64 = 0.096_225_044_864_937_6;

/// Point drawn uniformly from the Euclidean ball of the given radius.
pub(crate) fn ball_point(rng: &mut SeededRng, dim: usize, radius: f64) -> alloc::vec::Vec<f64> {
    let mut p: alloc::vec::Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let norm = linalg::norm(&p).max(f64::MIN_POSITIVE);
    let r = radius * libm::pow(rng.uniform(), 1.0 / dim as f64);
    linalg::scale(r / norm, &mut p);
    p
}

/// Checks `|g_i(w) - g_i(w')| <= C_g (1 + 1e-6) |w - w'|` on `pairs` random
/// pairs in the ball of radius `radius`, for every component.
pub fn validate_declared_lipschitz(problem: &dyn FccoProblem, radius: f64, pairs: usize, seed: u64) -> Result<()> {
    let c_g = problem.regularity().lipschitz;
    let d1 = problem.inner_dim();
    let (mut a, mut b) = (vec![0.0; d1], vec![0.0; d1]);
    let mut rng = SeededRng::new(seed, crate::rng::tag::PROBLEM_DATA).derive(&[0x11]);
    for _ in 0..pairs {
        let w = ball_point(&mut rng, problem.dim(), radius);
        let v = ball_point(&mut rng, problem.dim(), radius);
        let dist = linalg::dist(&w, &v);
        for i in 0..problem.num_components() {
            problem.inner_exact(i, &w, &mut a)?;
            problem.inner_exact(i, &v, &mut b)?;
            if linalg::dist(&a, &b) > c_g * (1.0 + 1e-6) * dist {
                return Err(Error::Assumption(alloc::format!(
                    "component {i}: observed Lipschitz ratio {} exceeds declared C_g = {c_g}",
                    linalg::dist(&a, &b) / dist
                )));
            }
        }
    }
    Ok(())
}
