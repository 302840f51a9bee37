//! Exact (full-population) evaluation of `F`, `F_lambda` and `grad F_lambda`,
//! stationarity certificates, and the brute-force oracles used to check the
//! closed forms.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::FccoProblem;
use crate::smoothing::{moreau_grad, moreau_value, OuterFunction, MAX_INPUT_DIM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactValues {
    /// `F(w)`, including the additive term.
    pub f: f64,
    /// `F_lambda(w)`, including the additive term.
    pub f_lambda: f64,
}

/// `F(w)` and `F_lambda(w)` from the exact oracles.
pub fn eval_exact(problem: &dyn FccoProblem, w: &[f64], lambda: f64) -> Result<ExactValues> {
    let n = problem.num_components();
    let d1 = problem.inner_dim();
    let mut g = vec![0.0; d1];
    let (mut f, mut f_lambda) = (0.0, 0.0);
    for i in 0..n {
        let outer = problem.outer(i);
        problem.inner_exact(i, w, &mut g)?;
        f += outer.value(&g);
        f_lambda += moreau_value(&outer, lambda, &g)?;
    }
    let h0 = if problem.has_additive() { problem.additive_value_exact(w)? } else { 0.0 };
    Ok(ExactValues {
        f: f / n as f64 + h0,
        f_lambda: f_lambda / n as f64 + h0,
    })
}

/// `grad F_lambda(w) = (1/n) sum_i J_i(w)^T grad f_{i,lambda}(g_i(w)) + grad h0(w)`.
pub fn grad_f_lambda_exact(problem: &dyn FccoProblem, w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    Ok(stationarity_parts(problem, w, lambda, false)?.gradient)
}

/// Computable stationarity surrogates at `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct StationarityReport {
    pub grad_f_lambda_norm: f64,
    /// `max_i |t_i - g_i(w)|` with `t_i = prox_{lambda f_i}(g_i(w))`; at most `lambda * C_f`.
    pub approx_t_residual: f64,
    /// `|(1/n) sum_i J_i(w)^T y_i + grad h0(w)|` with `y_i = grad f_{i,lambda}(g_i(w))`.
    /// The same expression as the gradient of `F_lambda`.
    pub approx_grad_residual: f64,
    /// `lambda_min(J J^T)` of the stacked `n*d1 x d` Jacobian, when requested.
    pub gram_min_eig: Option<f64>,
    /// Set when `n*d1 > d`, so the Gram matrix is singular by shape.
    pub gram_rank_deficient_by_shape: bool,
}

struct Parts {
    gradient: Vec<f64>,
    t_residual: f64,
    stacked: Option<Vec<f64>>,
}

fn stationarity_parts(problem: &dyn FccoProblem, w: &[f64], lambda: f64, keep_jacobian: bool) -> Result<Parts> {
    let n = problem.num_components();
    let d = problem.dim();
    let d1 = problem.inner_dim();
    let mut g = vec![0.0; d1];
    let mut y = vec![0.0; d1];
    let mut p = vec![0.0; d1];
    let mut jac = vec![0.0; d1 * d];
    let mut tmp = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut stacked = if keep_jacobian { Some(Vec::with_capacity(n * d1 * d)) } else { None };
    let mut t_residual: f64 = 0.0;
    for i in 0..n {
        let outer = problem.outer(i);
        problem.inner_exact(i, w, &mut g)?;
        problem.inner_jacobian_exact(i, w, &mut jac)?;
        outer.prox(lambda, &g, &mut p)?;
        t_residual = t_residual.max(linalg::dist(&p, &g));
        moreau_grad(&outer, lambda, &g, &mut y)?;
        linalg::mat_t_vec(&jac, d1, d, &y, &mut tmp);
        linalg::axpy(1.0, &tmp, &mut grad);
        if let Some(s) = stacked.as_mut() {
            s.extend_from_slice(&jac);
        }
    }
    linalg::scale(1.0 / n as f64, &mut grad);
    if problem.has_additive() {
        problem.additive_grad_exact(w, &mut tmp)?;
        linalg::axpy(1.0, &tmp, &mut grad);
    }
    Ok(Parts {
        gradient: grad,
        t_residual,
        stacked,
    })
}

pub fn stationarity_report(
    problem: &dyn FccoProblem,
    w: &[f64],
    lambda: f64,
    with_gram: bool,
) -> Result<StationarityReport> {
    let parts = stationarity_parts(problem, w, lambda, with_gram)?;
    let norm = linalg::norm(&parts.gradient);
    let (gram_min_eig, deficient) = match parts.stacked {
        Some(j) => {
            let rows = problem.num_components() * problem.inner_dim();
            let g = gram_min_eigenvalue(&j, rows, problem.dim());
            (Some(g.value), g.rank_deficient_by_shape)
        }
        None => (None, false),
    };
    Ok(StationarityReport {
        grad_f_lambda_norm: norm,
        approx_t_residual: parts.t_residual,
        approx_grad_residual: norm,
        gram_min_eig,
        gram_rank_deficient_by_shape: deficient,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramEigen {
    pub value: f64,
    pub rank_deficient_by_shape: bool,
}

/// `lambda_min(M M^T)` for a `rows x cols` matrix `M`. When `rows > cols` the
/// answer is 0 by shape and the flag is set.
pub fn gram_min_eigenvalue(m: &[f64], rows: usize, cols: usize) -> GramEigen {
    if rows > cols {
        return GramEigen {
            value: 0.0,
            rank_deficient_by_shape: true,
        };
    }
    let g = linalg::gram_rows(m, rows, cols);
    let eig = linalg::symmetric_eigenvalues(&g, rows);
    GramEigen {
        value: eig.first().copied().unwrap_or(0.0).max(0.0),
        rank_deficient_by_shape: false,
    }
}

/// Metric snapshot for a trace row, or `None` when the problem has no exact
/// oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub f: f64,
    pub f_lambda: f64,
    pub grad_norm: f64,
    pub stat_t_residual: f64,
    pub stat_grad_residual: f64,
    pub max_violation: Option<f64>,
}

pub fn snapshot(problem: &dyn FccoProblem, w: &[f64], lambda: f64) -> Result<Option<Snapshot>> {
    let values = match eval_exact(problem, w, lambda) {
        Ok(v) => v,
        Err(Error::Unsupported(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let report = stationarity_report(problem, w, lambda, false)?;
    Ok(Some(Snapshot {
        f: values.f,
        f_lambda: values.f_lambda,
        grad_norm: report.grad_f_lambda_norm,
        stat_t_residual: report.approx_t_residual,
        stat_grad_residual: report.approx_grad_residual,
        max_violation: problem.max_violation_exact(w),
    }))
}

/// Central differences `(f(w + h e_j) - f(w - h e_j)) / (2h)`.
pub fn finite_difference_gradient<F>(f: F, w: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = w.to_vec();
    (0..w.len())
        .map(|j| {
            let orig = x[j];
            x[j] = orig + h;
            let up = f(&x);
            x[j] = orig - h;
            let down = f(&x);
            x[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + libm::fabs(lo) + libm::fabs(hi)) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Grid scan over `[lo, hi]` with spacing at most `step` (capped at
/// `max_points`), then golden-section refinement on the bracket around the
/// best grid point.
fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, step: f64, max_points: usize) -> f64 {
    if hi <= lo {
        return lo;
    }
    let points = (libm::ceil((hi - lo) / step) as usize).clamp(2, max_points);
    let h = (hi - lo) / points as f64;
    let (mut best_k, mut best_v) = (0usize, f64::INFINITY);
    for k in 0..=points {
        let v = f(lo + h * k as f64);
        if v < best_v {
            best_v = v;
            best_k = k;
        }
    }
    let a = lo + h * best_k.saturating_sub(1) as f64;
    let b = (lo + h * (best_k + 1) as f64).min(hi);
    golden_section(f, a, b)
}

/// Brute-force `prox_{lambda f}(t)`: grid search of
/// `f(v) + |v - t|^2 / (2 lambda)` over the box `t +- 3 lambda C_f` followed by
/// golden-section refinement. Two-dimensional inputs are handled by nested
/// one-dimensional searches (partial minimization keeps the objective
/// unimodal). Only for `input_dim <= 2`.
pub fn brute_force_prox(outer: &OuterFunction, lambda: f64, t: &[f64], step: f64) -> Result<Vec<f64>> {
    outer.check_smoothing(lambda)?;
    let k = outer.input_dim();
    if k > MAX_INPUT_DIM || t.len() != k {
        return Err(Error::unsupported("brute-force prox only handles inputs of dimension 1 or 2"));
    }
    if !(step > 0.0) {
        return Err(Error::config("grid step must be positive"));
    }
    let radius = 3.0 * lambda * outer.lipschitz();
    let inv = 1.0 / (2.0 * lambda);
    match k {
        1 => {
            let obj = |v: f64| outer.value(&[v]) + (v - t[0]) * (v - t[0]) * inv;
            Ok(vec![grid_then_golden(obj, t[0] - radius, t[0] + radius, step, 2_000_000)])
        }
        _ => {
            let inner_min = |v0: f64| {
                let obj = |v1: f64| outer.value(&[v0, v1]) + ((v0 - t[0]) * (v0 - t[0]) + (v1 - t[1]) * (v1 - t[1])) * inv;
                let v1 = grid_then_golden(obj, t[1] - radius, t[1] + radius, step, 400);
                (v1, obj(v1))
            };
            let v0 = grid_then_golden(|v0| inner_min(v0).1, t[0] - radius, t[0] + radius, step, 400);
            Ok(vec![v0, inner_min(v0).0])
        }
    }
}
