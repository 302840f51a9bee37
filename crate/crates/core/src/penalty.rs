//! Smoothed exact-penalty reformulation of
//! `min_w g0(w) s.t. c_i(w) <= 0, i = 1..m`:
//!
//! ```text
//! Phi_lambda(w) = g0(w) + (1/m) sum_i f_lambda(g_i(w)),    f = rho [.]_+
//! ```
//!
//! which is an FCCO instance with `n = m` and `g0` as the additive term. The
//! envelope gradients double as Lagrange multiplier estimates
//! `nu_i = min([c_i]_+, lambda rho) / (lambda m)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{FccoProblem, Regularity};
use crate::smoothing::{moreau_grad, moreau_value, OuterFunction};

/// Shape of each constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `c_i(w) = g_i(w) <= 0` with scalar `g_i`.
    Hinge,
    /// `c_i(w) = |g_i1(w) - g_i2(w)| - kappa <= 0` with two-output `g_i`.
    AbsGap { kappa: f64 },
}

impl ConstraintKind {
    pub fn inner_dim(&self) -> usize {
        match self {
            ConstraintKind::Hinge => 1,
            ConstraintKind::AbsGap { .. } => 2,
        }
    }

    /// Penalty outer function with slope `rho`.
    pub fn outer(&self, rho: f64) -> OuterFunction {
        match *self {
            ConstraintKind::Hinge => OuterFunction::ScaledHinge { rho },
            ConstraintKind::AbsGap { kappa } => OuterFunction::GapHinge { kappa, scale: rho },
        }
    }

    /// `c_i` from the inner output.
    pub fn violation(&self, g: &[f64]) -> f64 {
        match *self {
            ConstraintKind::Hinge => g[0],
            ConstraintKind::AbsGap { kappa } => libm::fabs(g[0] - g[1]) - kappa,
        }
    }
}

/// Objective and constraint oracles. Each constraint `i` and the objective own
/// a finite data population; stochastic oracles average over a batch.
/// Jacobians are `inner_dim x dim`, row-major.
pub trait ConstrainedProblem: Sync {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn kind(&self) -> ConstraintKind;

    fn objective_population(&self) -> usize {
        1
    }
    fn objective_value_exact(&self, w: &[f64]) -> Result<f64>;
    fn objective_grad(&self, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()>;
    fn objective_grad_exact(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        let all: Vec<usize> = (0..self.objective_population()).collect();
        self.objective_grad(w, &all, out)
    }

    fn constraint_population(&self, _i: usize) -> usize {
        1
    }
    fn constraint_value(&self, i: usize, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()>;
    fn constraint_vjp(&self, i: usize, w: &[f64], batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()>;

    fn constraint_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        let all: Vec<usize> = (0..self.constraint_population(i)).collect();
        self.constraint_value(i, w, &all, out)
    }

    fn constraint_jacobian_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        let all: Vec<usize> = (0..self.constraint_population(i)).collect();
        let k = self.kind().inner_dim();
        let d = self.dim();
        let mut e = vec![0.0; k];
        for r in 0..k {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[r] = 1.0;
            self.constraint_vjp(i, w, &all, &e, &mut out[r * d..(r + 1) * d])?;
        }
        Ok(())
    }

    /// Constants of the constraint maps; `additive_weak_convexity` is the
    /// objective's weak-convexity modulus.
    fn regularity(&self) -> Regularity;
}

macro_rules! forward_constrained {
    ($($ty:ty),*) => {$(
        impl<T: ConstrainedProblem + ?Sized> ConstrainedProblem for $ty {
            fn dim(&self) -> usize { (**self).dim() }
            fn num_constraints(&self) -> usize { (**self).num_constraints() }
            fn kind(&self) -> ConstraintKind { (**self).kind() }
            fn objective_population(&self) -> usize { (**self).objective_population() }
            fn objective_value_exact(&self, w: &[f64]) -> Result<f64> { (**self).objective_value_exact(w) }
            fn objective_grad(&self, w: &[f64], b: &[usize], out: &mut [f64]) -> Result<()> {
                (**self).objective_grad(w, b, out)
            }
            fn objective_grad_exact(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
                (**self).objective_grad_exact(w, out)
            }
            fn constraint_population(&self, i: usize) -> usize { (**self).constraint_population(i) }
            fn constraint_value(&self, i: usize, w: &[f64], b: &[usize], out: &mut [f64]) -> Result<()> {
                (**self).constraint_value(i, w, b, out)
            }
            fn constraint_vjp(&self, i: usize, w: &[f64], b: &[usize], y: &[f64], out: &mut [f64]) -> Result<()> {
                (**self).constraint_vjp(i, w, b, y, out)
            }
            fn constraint_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
                (**self).constraint_exact(i, w, out)
            }
            fn constraint_jacobian_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
                (**self).constraint_jacobian_exact(i, w, out)
            }
            fn regularity(&self) -> Regularity { (**self).regularity() }
        }
    )*};
}

forward_constrained!(&T, alloc::boxed::Box<T>);

/// The penalty reformulation as an [`FccoProblem`].
#[derive(Clone, Debug)]
pub struct PenaltyProblem<C> {
    cp: C,
    rho: f64,
    lambda: f64,
}

impl<C: ConstrainedProblem> PenaltyProblem<C> {
    pub fn constrained(&self) -> &C {
        &self.cp
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The smoothing parameter the problem was built for.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Wraps `cp` with penalty slope `rho`. `lambda` is recorded for reporting;
/// the solver's own smoothing parameter is what gets used.
pub fn build_penalty_problem<C: ConstrainedProblem>(cp: C, rho: f64, lambda: f64) -> Result<PenaltyProblem<C>> {
    if !(rho > 0.0 && rho.is_finite() && lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config("penalty needs rho > 0 and lambda > 0"));
    }
    if cp.num_constraints() == 0 || cp.dim() == 0 {
        return Err(Error::config("constrained problem needs at least one constraint and one variable"));
    }
    cp.kind().outer(rho).validate()?;
    Ok(PenaltyProblem { cp, rho, lambda })
}

impl<C: ConstrainedProblem> FccoProblem for PenaltyProblem<C> {
    fn num_components(&self) -> usize {
        self.cp.num_constraints()
    }

    fn dim(&self) -> usize {
        self.cp.dim()
    }

    fn inner_dim(&self) -> usize {
        self.cp.kind().inner_dim()
    }

    fn outer(&self, _i: usize) -> OuterFunction {
        self.cp.kind().outer(self.rho)
    }

    fn population(&self, i: usize) -> usize {
        self.cp.constraint_population(i)
    }

    fn inner_value(&self, i: usize, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        self.cp.constraint_value(i, w, batch, out)
    }

    fn inner_vjp(&self, i: usize, w: &[f64], batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()> {
        self.cp.constraint_vjp(i, w, batch, y, out)
    }

    fn inner_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.cp.constraint_exact(i, w, out)
    }

    fn inner_jacobian_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.cp.constraint_jacobian_exact(i, w, out)
    }

    fn regularity(&self) -> Regularity {
        self.cp.regularity()
    }

    fn has_additive(&self) -> bool {
        true
    }

    fn additive_population(&self) -> usize {
        self.cp.objective_population()
    }

    fn additive_value_exact(&self, w: &[f64]) -> Result<f64> {
        self.cp.objective_value_exact(w)
    }

    fn additive_grad(&self, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        self.cp.objective_grad(w, batch, out)
    }

    fn additive_grad_exact(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.cp.objective_grad_exact(w, out)
    }

    fn max_violation_exact(&self, w: &[f64]) -> Option<f64> {
        max_violation(&self.cp, w).ok()
    }
}

/// `max_i c_i(w)` from the exact oracles.
pub fn max_violation(cp: &dyn ConstrainedProblem, w: &[f64]) -> Result<f64> {
    let kind = cp.kind();
    let mut g = vec![0.0; kind.inner_dim()];
    let mut worst = f64::NEG_INFINITY;
    for i in 0..cp.num_constraints() {
        cp.constraint_exact(i, w, &mut g)?;
        worst = worst.max(kind.violation(&g));
    }
    Ok(worst)
}

/// `g0(w) + (1/m) sum_i f(g_i(w))`, the unsmoothed exact penalty.
pub fn exact_penalty_value(cp: &dyn ConstrainedProblem, w: &[f64], rho: f64) -> Result<f64> {
    let kind = cp.kind();
    let outer = kind.outer(rho);
    let m = cp.num_constraints();
    let mut g = vec![0.0; kind.inner_dim()];
    let mut sum = 0.0;
    for i in 0..m {
        cp.constraint_exact(i, w, &mut g)?;
        sum += outer.value(&g);
    }
    Ok(cp.objective_value_exact(w)? + sum / m as f64)
}

/// `Phi_lambda(w)`.
pub fn smoothed_penalty_value(cp: &dyn ConstrainedProblem, w: &[f64], rho: f64, lambda: f64) -> Result<f64> {
    let kind = cp.kind();
    let outer = kind.outer(rho);
    let m = cp.num_constraints();
    let mut g = vec![0.0; kind.inner_dim()];
    let mut sum = 0.0;
    for i in 0..m {
        cp.constraint_exact(i, w, &mut g)?;
        sum += moreau_value(&outer, lambda, &g)?;
    }
    Ok(cp.objective_value_exact(w)? + sum / m as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    /// `|grad g0(w) + (1/m) sum_i J_i(w)^T grad f_lambda(g_i(w))|`.
    pub stationarity: f64,
    pub max_violation: f64,
    /// `sum_i |c_i(w) nu_i|`.
    pub complementarity: f64,
    /// `nu_i`, each in `[0, rho / m]`.
    pub multipliers: Vec<f64>,
}

/// KKT residuals at `w` with multipliers read off the envelope gradients.
pub fn kkt_report(cp: &dyn ConstrainedProblem, w: &[f64], rho: f64, lambda: f64) -> Result<KktReport> {
    let kind = cp.kind();
    let outer = kind.outer(rho);
    outer.check_smoothing(lambda)?;
    let m = cp.num_constraints();
    let d = cp.dim();
    let k = kind.inner_dim();
    let mut g = vec![0.0; k];
    let mut y = vec![0.0; k];
    let mut jac = vec![0.0; k * d];
    let mut tmp = vec![0.0; d];
    let mut grad = vec![0.0; d];
    cp.objective_grad_exact(w, &mut grad)?;
    let mut multipliers = Vec::with_capacity(m);
    let (mut worst, mut comp) = (f64::NEG_INFINITY, 0.0);
    for i in 0..m {
        cp.constraint_exact(i, w, &mut g)?;
        cp.constraint_jacobian_exact(i, w, &mut jac)?;
        moreau_grad(&outer, lambda, &g, &mut y)?;
        linalg::mat_t_vec(&jac, k, d, &y, &mut tmp);
        linalg::axpy(1.0 / m as f64, &tmp, &mut grad);
        let nu = libm::fabs(y[0]) / m as f64;
        let c = kind.violation(&g);
        worst = worst.max(c);
        comp += libm::fabs(c * nu);
        multipliers.push(nu);
    }
    Ok(KktReport {
        stationarity: linalg::norm(&grad),
        max_violation: worst,
        complementarity: comp,
        multipliers,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityReport {
    /// Smallest singular value of the `d x m` matrix of constraint gradients.
    pub sigma_min: f64,
    /// Set when `m > d`, so `sigma_min` is 0 by shape.
    pub rank_deficient_by_shape: bool,
}

/// Smallest singular value of `[grad c_1(w), .., grad c_m(w)]`.
pub fn regularity_check(cp: &dyn ConstrainedProblem, w: &[f64]) -> Result<RegularityReport> {
    let kind = cp.kind();
    let m = cp.num_constraints();
    let d = cp.dim();
    let k = kind.inner_dim();
    let mut g = vec![0.0; k];
    let mut jac = vec![0.0; k * d];
    // rows are constraint gradients, so this is the transpose of the d x m matrix
    let mut rows = Vec::with_capacity(m * d);
    for i in 0..m {
        cp.constraint_jacobian_exact(i, w, &mut jac)?;
        match kind {
            ConstraintKind::Hinge => rows.extend_from_slice(&jac),
            ConstraintKind::AbsGap { .. } => {
                cp.constraint_exact(i, w, &mut g)?;
                let sign = if g[0] >= g[1] { 1.0 } else { -1.0 };
                rows.extend((0..d).map(|j| sign * (jac[j] - jac[d + j])));
            }
        }
    }
    Ok(singular_value_min(&rows, m, d))
}

/// Smallest singular value of the `cols x rows` matrix whose columns are the
/// rows of `m` (row-major `rows x cols`).
pub fn singular_value_min(m: &[f64], rows: usize, cols: usize) -> RegularityReport {
    if rows > cols {
        return RegularityReport {
            sigma_min: 0.0,
            rank_deficient_by_shape: true,
        };
    }
    let gram = linalg::gram_rows(m, rows, cols);
    let eig = linalg::symmetric_eigenvalues(&gram, rows);
    RegularityReport {
        sigma_min: libm::sqrt(eig.first().copied().unwrap_or(0.0).max(0.0)),
        rank_deficient_by_shape: false,
    }
}

/// `1.5 m (C_g + 1) / delta`, a penalty slope that clears the exactness
/// threshold `m (C_g + 1) / delta` with margin.
pub fn suggest_penalty(m: usize, c_g: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && c_g >= 0.0) {
        return Err(Error::config("suggest_penalty needs delta > 0 and C_g >= 0"));
    }
    Ok(1.5 * m as f64 * (c_g + 1.0) / delta)
}

/// Soft checks of the exactness hypotheses. Nothing here is fatal: `delta` is
/// usually only known after the fact.
pub fn hypothesis_warnings(m: usize, c_g: f64, rho: f64, delta: Option<f64>, eps: Option<f64>, lambda: f64) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(delta) = delta {
        let threshold = m as f64 * (c_g + 1.0) / delta;
        if rho <= threshold {
            out.push(alloc::format!(
                "rho = {rho} does not exceed m (C_g + 1) / delta = {threshold}; the penalty may not be exact"
            ));
        }
    }
    if let Some(eps) = eps {
        let expect = eps / rho;
        if libm::fabs(lambda - expect) > 1e-12 * expect.max(1.0) {
            out.push(alloc::format!("lambda = {lambda} differs from eps / rho = {expect}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds() {
        assert_eq!(ConstraintKind::Hinge.inner_dim(), 1);
        assert_eq!(ConstraintKind::AbsGap { kappa: 0.1 }.inner_dim(), 2);
        assert_eq!(ConstraintKind::Hinge.violation(&[0.3]), 0.3);
        assert!((ConstraintKind::AbsGap { kappa: 0.1 }.violation(&[0.2, 0.5]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn singular_values() {
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let r = singular_value_min(&id, 2, 3);
        assert!((r.sigma_min - 1.0).abs() < 1e-14);
        let rep = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        assert!(singular_value_min(&rep, 2, 3).sigma_min < 1e-7);
        let wide = singular_value_min(&id, 3, 2);
        assert_eq!(wide.sigma_min, 0.0);
        assert!(wide.rank_deficient_by_shape);
    }

    #[test]
    fn penalty_helpers() {
        assert!((suggest_penalty(2, 1.0, 0.5).unwrap() - 12.0).abs() < 1e-12);
        assert!(suggest_penalty(2, 1.0, 0.0).is_err());
        assert_eq!(hypothesis_warnings(1, 1.0, 10.0, Some(1.0), Some(0.1), 0.01).len(), 0);
        assert_eq!(hypothesis_warnings(1, 1.0, 1.0, Some(1.0), None, 0.01).len(), 1);
        assert_eq!(hypothesis_warnings(1, 1.0, 10.0, None, Some(0.1), 0.5).len(), 1);
    }
}
