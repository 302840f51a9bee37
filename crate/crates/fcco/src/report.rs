//! `report.json`: run summary plus stationarity, Gram, KKT and regularity
//! diagnostics at the returned point.

use fcco_core::metrics::stationarity_report;
use fcco_core::penalty::{
    exact_penalty_value, hypothesis_warnings, kkt_report, regularity_check, smoothed_penalty_value, ConstrainedProblem,
};
use fcco_core::{Error, FccoProblem, SolverTrace};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub problem: &'static str,
    pub solver: &'static str,
    pub seed: u64,
    pub iterations: usize,
    pub rows: usize,
    pub last_row: Option<LastRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_final: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_output: Option<Vec<f64>>,
    /// Diagnostics at `w_output`, the iterate the guarantees are about.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<Stationarity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constrained: Option<Constrained>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LastRow {
    pub iteration: usize,
    pub inner_oracle_calls: u64,
    pub component_draws: u64,
    #[serde(rename = "F")]
    pub f: Option<f64>,
    #[serde(rename = "F_lambda")]
    pub f_lambda: Option<f64>,
    pub grad_norm: Option<f64>,
    pub max_violation: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Stationarity {
    pub lambda: f64,
    pub grad_f_lambda_norm: f64,
    pub approx_t_residual: f64,
    pub approx_grad_residual: f64,
    /// `lambda_min` of the stacked inner Jacobian's Gram matrix.
    pub gram_min_eig: Option<f64>,
    pub gram_rank_deficient_by_shape: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Constrained {
    pub rho: f64,
    pub lambda: f64,
    pub kkt_stationarity: f64,
    pub max_violation: f64,
    pub complementarity: f64,
    pub multipliers: Vec<f64>,
    pub exact_penalty: f64,
    pub smoothed_penalty: f64,
    /// Smallest singular value of the constraint-gradient matrix.
    pub regularity_sigma_min: f64,
    pub regularity_rank_deficient_by_shape: bool,
    pub warnings: Vec<String>,
}

pub fn last_row(trace: &SolverTrace) -> Option<LastRow> {
    trace.last().map(|r| LastRow {
        iteration: r.iteration,
        inner_oracle_calls: r.inner_oracle_calls,
        component_draws: r.component_draws,
        f: r.f_value,
        f_lambda: r.f_lambda,
        grad_norm: r.grad_norm,
        max_violation: r.max_violation,
    })
}

/// Stationarity at `w`, or `None` for problems without exact oracles.
pub fn stationarity(p: &dyn FccoProblem, w: &[f64], lambda: f64) -> Result<Option<Stationarity>, Error> {
    match stationarity_report(p, w, lambda, true) {
        Ok(r) => Ok(Some(Stationarity {
            lambda,
            grad_f_lambda_norm: r.grad_f_lambda_norm,
            approx_t_residual: r.approx_t_residual,
            approx_grad_residual: r.approx_grad_residual,
            gram_min_eig: r.gram_min_eig,
            gram_rank_deficient_by_shape: r.gram_rank_deficient_by_shape,
        })),
        Err(Error::Unsupported(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn constrained(
    p: &dyn FccoProblem,
    cp: &dyn ConstrainedProblem,
    w: &[f64],
    rho: f64,
    lambda: f64,
) -> Result<Constrained, Error> {
    let kkt = kkt_report(cp, w, rho, lambda)?;
    let reg = regularity_check(cp, w)?;
    let c_g = p.regularity().lipschitz;
    // the local singular value stands in for the regularity constant delta
    let warnings = hypothesis_warnings(cp.num_constraints(), c_g, rho, Some(reg.sigma_min), None, lambda);
    Ok(Constrained {
        rho,
        lambda,
        kkt_stationarity: kkt.stationarity,
        max_violation: kkt.max_violation,
        complementarity: kkt.complementarity,
        multipliers: kkt.multipliers,
        exact_penalty: exact_penalty_value(cp, w, rho)?,
        smoothed_penalty: smoothed_penalty_value(cp, w, rho, lambda)?,
        regularity_sigma_min: reg.sigma_min,
        regularity_rank_deficient_by_shape: reg.rank_deficient_by_shape,
        warnings,
    })
}
