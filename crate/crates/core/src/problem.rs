//! The oracle contract every solver is written against.

use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{Error, Result};
use crate::smoothing::OuterFunction;

/// A decision vector with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(DecisionVector(values))
        } else {
            Err(Error::config("decision vector has non-finite entries"))
        }
    }

    pub fn zeros(dim: usize) -> Self {
        DecisionVector(alloc::vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DecisionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Declared regularity constants of the inner maps (and of the additive term).
///
/// `smoothness` is `None` when the inner maps are only weakly convex.
/// `weak_convexity` is `None` when no weak-convexity modulus is known; a
/// convex inner family declares `Some(0.0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Regularity {
    pub lipschitz: f64,
    pub smoothness: Option<f64>,
    pub weak_convexity: Option<f64>,
    /// Weak-convexity modulus of the additive term (0 when convex or absent).
    pub additive_weak_convexity: f64,
}

/// Oracle bundle for `F(w) = (1/n) sum_i f_i(g_i(w)) + h0(w)`.
///
/// Component `i` owns a finite data population `0..population(i)`; a batch is a
/// list of distinct indices into it and stochastic oracles average over the
/// batch. Oracles must be pure so they can be called from several workers.
///
/// Jacobians are `inner_dim x dim`, row-major.
pub trait FccoProblem: Sync {
    fn num_components(&self) -> usize;
    fn dim(&self) -> usize;
    fn inner_dim(&self) -> usize;
    fn outer(&self, i: usize) -> OuterFunction;
    fn population(&self, i: usize) -> usize;

    fn inner_value(&self, i: usize, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()>;

    /// Batch average of `J_i(w; xi)^T y`.
    fn inner_vjp(&self, i: usize, w: &[f64], batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()>;

    fn inner_exact(&self, _i: usize, _w: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::unsupported("exact inner values"))
    }

    fn inner_jacobian_exact(&self, _i: usize, _w: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::unsupported("exact inner Jacobian"))
    }

    fn regularity(&self) -> Regularity;

    fn has_additive(&self) -> bool {
        false
    }

    fn additive_population(&self) -> usize {
        1
    }

    fn additive_value_exact(&self, _w: &[f64]) -> Result<f64> {
        Ok(0.0)
    }

    /// Stochastic gradient of the additive term, written into `out`.
    fn additive_grad(&self, _w: &[f64], _batch: &[usize], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }

    fn additive_grad_exact(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        let all: Vec<usize> = (0..self.additive_population()).collect();
        self.additive_grad(w, &all, out)
    }

    /// `max_i c_i(w)` for problems that come from a constrained formulation.
    fn max_violation_exact(&self, _w: &[f64]) -> Option<f64> {
        None
    }
}

/// Checks that the outer catalog agrees with the declared inner dimension.
pub fn validate_shapes(problem: &dyn FccoProblem) -> Result<()> {
    if problem.num_components() == 0 || problem.dim() == 0 || problem.inner_dim() == 0 {
        return Err(Error::config("problem dimensions must be positive"));
    }
    for i in 0..problem.num_components() {
        let outer = problem.outer(i);
        outer.validate()?;
        if outer.input_dim() != problem.inner_dim() {
            return Err(Error::config(alloc::format!(
                "component {i}: outer function takes {} inputs but inner_dim is {}",
                outer.input_dim(),
                problem.inner_dim()
            )));
        }
        if problem.population(i) == 0 {
            return Err(Error::config(alloc::format!("component {i} has an empty population")));
        }
    }
    Ok(())
}

/// Smallest component population.
pub fn min_population(problem: &dyn FccoProblem) -> usize {
    (0..problem.num_components())
        .map(|i| problem.population(i))
        .min()
        .unwrap_or(0)
}

/// Largest Lipschitz constant over the outer catalog.
pub fn max_outer_lipschitz(problem: &dyn FccoProblem) -> f64 {
    (0..problem.num_components())
        .map(|i| problem.outer(i).lipschitz())
        .fold(0.0, f64::max)
}
