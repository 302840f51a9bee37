//! Double-loop method on the doubly smoothed objective
//! `F_{lambda,nu}(w) = min_z F_lambda(z) + |z - w|^2 / (2 nu)`.
//!
//! The inner loop approximates `prox_{nu F_lambda}(w_t)` with a stochastic
//! primal-dual method on
//!
//! ```text
//! min_z max_y (1/n) sum_i [y_i^T g_i(z) - f_{i,lambda}^*(y_i)] + h0(z) + |z - w_t|^2 / (2 nu)
//! ```
//!
//! The dual step is carried out on trackers `u_i` with `y_i = grad f_{i,lambda}(u_i)`.
//! The outer loop takes a momentum step along `(w_t - z_hat) / nu`, which
//! estimates `grad F_{lambda,nu}(w_t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Failure, Result};
use crate::linalg;
use crate::problem::{self, FccoProblem};
use crate::rng::{sample_components, sample_data_batch, tag, SeededRng};
use crate::smoothing::{dual_mixing, dual_tracker_update};
use crate::sonex::{adam_step, UpdateKind};
use crate::trace::{default_metric_every, Counters, Monitor, Recorder, SolverTrace};

/// Number of inner iterations per outer iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum InnerSchedule {
    Constant { k: usize },
    /// `K_t = base * (1 + t)`.
    Growing { base: usize },
}

impl InnerSchedule {
    pub fn at(&self, t: usize) -> usize {
        match *self {
            InnerSchedule::Constant { k } => k,
            InnerSchedule::Growing { base } => base.saturating_mul(t + 1),
        }
    }
}

#[cfg(feature = "serde")]
fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct Alexr2Config {
    pub lambda: f64,
    pub nu: f64,
    /// Inner primal step.
    pub eta: f64,
    /// Extrapolation weight.
    pub theta: f64,
    /// Dual step; trackers mix with `gamma / (1 + gamma)`.
    pub gamma: f64,
    pub beta: f64,
    /// Outer step.
    pub alpha: f64,
    pub inner: InnerSchedule,
    pub iterations: usize,
    pub b1: usize,
    pub b2: usize,
    #[cfg_attr(feature = "serde", serde(default = "yes"))]
    pub warm_start_dual: bool,
    /// Use `G_t = (beta / nu)(w_t - z_hat)` inside the momentum average, so
    /// `beta` enters twice.
    #[cfg_attr(feature = "serde", serde(default))]
    pub literal_step12: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub update: UpdateKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub metric_every: Option<usize>,
}

/// Weak-convexity bound of `F_lambda` built from the declared constants:
/// `sqrt(d1) C_f rho_g` when every outer function is monotone and `rho_g` is
/// declared, `sqrt(d1) C_f L_g` otherwise, plus the additive term's modulus.
pub fn weak_convexity_bound(problem: &dyn FccoProblem) -> Result<f64> {
    let reg = problem.regularity();
    let c_f = problem::max_outer_lipschitz(problem);
    let monotone = (0..problem.num_components()).all(|i| problem.outer(i).is_monotone_nondecreasing());
    let inner = match (monotone, reg.weak_convexity, reg.smoothness) {
        (true, Some(rho), _) => rho,
        (_, _, Some(l)) => l,
        _ => {
            return Err(Error::Assumption(
                "no weak-convexity or smoothness constant declared for the inner maps".into(),
            ))
        }
    };
    Ok(libm::sqrt(problem.inner_dim() as f64) * c_f * inner + reg.additive_weak_convexity)
}

/// Structural requirements of the inner primal-dual solver: convex outer
/// functions, and monotone ones whenever the inner maps are not smooth.
pub fn check_assumptions(problem: &dyn FccoProblem) -> Result<()> {
    let smooth = problem.regularity().smoothness.is_some();
    for i in 0..problem.num_components() {
        let outer = problem.outer(i);
        if !outer.is_convex() {
            return Err(Error::unsupported(alloc::format!(
                "component {i}: the primal-dual inner solver needs a convex outer function, got {outer:?}"
            )));
        }
        if !smooth && !outer.is_monotone_nondecreasing() {
            return Err(Error::Assumption(alloc::format!(
                "component {i}: weakly convex inner maps need a monotone nondecreasing outer function, got {outer:?}"
            )));
        }
    }
    Ok(())
}

impl Alexr2Config {
    pub fn validate(&self, problem: &dyn FccoProblem) -> Result<()> {
        problem::validate_shapes(problem)?;
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.lambda) || !positive(self.nu) || !positive(self.eta) || !positive(self.gamma) {
            return Err(Error::config("lambda, nu, eta and gamma must be positive"));
        }
        if !positive(self.alpha) {
            return Err(Error::config("alpha must be positive"));
        }
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return Err(Error::config("theta must lie in [0, 1)"));
        }
        if !(self.beta > 0.0 && self.beta <= 0.5) {
            return Err(Error::config("beta must lie in (0, 1/2]"));
        }
        let n = problem.num_components();
        if self.b1 == 0 || self.b1 > n {
            return Err(Error::config(alloc::format!("b1 = {} must lie in [1, {n}]", self.b1)));
        }
        let pop = problem::min_population(problem);
        if self.b2 == 0 || self.b2 > pop {
            return Err(Error::config(alloc::format!("b2 = {} must lie in [1, {pop}]", self.b2)));
        }
        if self.metric_every == Some(0) {
            return Err(Error::config("metric_every must be positive"));
        }
        if let UpdateKind::Adam { adam } = &self.update {
            adam.validate()?;
        }
        for i in 0..n {
            problem.outer(i).check_smoothing(self.lambda)?;
        }
        check_assumptions(problem)?;
        let rho = weak_convexity_bound(problem)?;
        if rho * self.nu >= 1.0 {
            return Err(Error::config(alloc::format!(
                "nu = {} must be below 1/rho = {} for the proximal subproblem to be strongly convex",
                self.nu,
                1.0 / rho
            )));
        }
        Ok(())
    }
}

/// `g_now + theta (g_now - g_prev)`.
pub fn extrapolated_inner_value(g_now: &[f64], g_prev: &[f64], theta: f64, out: &mut [f64]) {
    for j in 0..out.len() {
        out[j] = g_now[j] + theta * (g_now[j] - g_prev[j]);
    }
}

/// Minimizer of `<G, z> + |z - w|^2 / (2 nu) + |z - z_k|^2 / (2 eta)`.
pub fn inner_primal_step(z_k: &[f64], w: &[f64], g: &[f64], nu: f64, eta: f64, out: &mut [f64]) {
    let denom = 1.0 / eta + 1.0 / nu;
    for j in 0..out.len() {
        out[j] = (z_k[j] / eta + w[j] / nu - g[j]) / denom;
    }
}

/// `v <- (1 - beta) v + beta (w - z_hat) / nu`, `w <- w - alpha v`. With
/// `literal` the direction is additionally scaled by `beta`.
pub fn outer_momentum_step(
    w: &mut [f64],
    z_hat: &[f64],
    v: &mut [f64],
    beta: f64,
    alpha: f64,
    nu: f64,
    literal: bool,
) {
    let c = if literal { beta / nu } else { 1.0 / nu };
    for j in 0..w.len() {
        v[j] = (1.0 - beta) * v[j] + beta * c * (w[j] - z_hat[j]);
        w[j] -= alpha * v[j];
    }
}

/// Cold dual start `u_i = g_i(w; B_i)`.
pub fn init_duals(problem: &dyn FccoProblem, w: &[f64], b2: usize, rng: &SeededRng) -> Result<Vec<f64>> {
    let d1 = problem.inner_dim();
    let mut u = vec![0.0; problem.num_components() * d1];
    for (i, row) in u.chunks_mut(d1).enumerate() {
        let batch = sample_data_batch(&mut rng.derive(&[tag::DUAL_INIT, i as u64]), problem.population(i), b2)?;
        problem.inner_value(i, w, &batch, row)?;
    }
    Ok(u)
}

/// Parameters of one inner run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerParams {
    pub lambda: f64,
    pub nu: f64,
    pub eta: f64,
    pub theta: f64,
    pub gamma: f64,
    pub b1: usize,
    pub b2: usize,
}

impl From<&Alexr2Config> for InnerParams {
    fn from(c: &Alexr2Config) -> Self {
        InnerParams {
            lambda: c.lambda,
            nu: c.nu,
            eta: c.eta,
            theta: c.theta,
            gamma: c.gamma,
            b1: c.b1,
            b2: c.b2,
        }
    }
}

/// Runs `k` inner iterations from `z = w` and returns `z_hat`. The dual
/// trackers `u` (an `n x d1` block) are updated in place so the caller can
/// warm-start the next run. Values and vector-Jacobian products use
/// independent batches.
pub fn run_inner_alexr(
    problem: &dyn FccoProblem,
    w: &[f64],
    params: &InnerParams,
    k: usize,
    rng: &SeededRng,
    u: &mut [f64],
    counters: &mut Counters,
) -> Result<Vec<f64>> {
    let n = problem.num_components();
    let d = problem.dim();
    let d1 = problem.inner_dim();
    let mix = dual_mixing(params.gamma);
    let mut z = w.to_vec();
    let mut z_prev = w.to_vec();
    let mut z_next = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut g_now = vec![0.0; d1];
    let mut g_old = vec![0.0; d1];
    let mut g_tilde = vec![0.0; d1];
    let mut u_new = vec![0.0; d1];
    let mut y = vec![0.0; d1];
    let add_batch = params.b2.min(problem.additive_population());

    for step in 0..k {
        let s = step as u64;
        let components = sample_components(&mut rng.derive(&[tag::COMPONENTS, s]), n, params.b1)?;
        counters.component_draws += components.len() as u64;
        g.iter_mut().for_each(|x| *x = 0.0);
        for &i in &components {
            let pop = problem.population(i);
            let batch = sample_data_batch(&mut rng.derive(&[tag::VALUE_BATCH, s, i as u64]), pop, params.b2)?;
            problem.inner_value(i, &z, &batch, &mut g_now)?;
            problem.inner_value(i, &z_prev, &batch, &mut g_old)?;
            extrapolated_inner_value(&g_now, &g_old, params.theta, &mut g_tilde);
            let row = &mut u[i * d1..(i + 1) * d1];
            dual_tracker_update(&problem.outer(i), params.lambda, row, &g_tilde, mix, &mut u_new, &mut y)?;
            row.copy_from_slice(&u_new);
            if !linalg::all_finite(row) {
                return Err(Error::NonFinite {
                    iteration: step + 1,
                    what: "dual tracker",
                });
            }
            let vjp_batch = sample_data_batch(&mut rng.derive(&[tag::VJP_BATCH, s, i as u64]), pop, params.b2)?;
            problem.inner_vjp(i, &z, &vjp_batch, &y, &mut tmp)?;
            linalg::axpy(1.0, &tmp, &mut g);
        }
        counters.inner_oracle_calls += 3 * components.len() as u64;
        linalg::scale(1.0 / components.len() as f64, &mut g);
        if problem.has_additive() {
            let batch = sample_data_batch(
                &mut rng.derive(&[tag::ADDITIVE_BATCH, s]),
                problem.additive_population(),
                add_batch,
            )?;
            problem.additive_grad(&z, &batch, &mut tmp)?;
            linalg::axpy(1.0, &tmp, &mut g);
        }
        inner_primal_step(&z, w, &g, params.nu, params.eta, &mut z_next);
        debug_assert!((0..d).all(|j| {
            let r = g[j] + (z_next[j] - w[j]) / params.nu + (z_next[j] - z[j]) / params.eta;
            r.abs() <= 1e-9 * (1.0 + g[j].abs() + (w[j] / params.nu).abs() + (z[j] / params.eta).abs())
        }));
        if !linalg::all_finite(&z_next) {
            return Err(Error::NonFinite {
                iteration: step + 1,
                what: "inner iterate",
            });
        }
        core::mem::swap(&mut z_prev, &mut z);
        core::mem::swap(&mut z, &mut z_next);
    }
    Ok(z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alexr2Run {
    pub trace: SolverTrace,
    pub w_final: Vec<f64>,
    /// The uniformly sampled iterate `w_tau`, `tau` in `1..=T` (`w0` when `T = 0`).
    pub w_output: Vec<f64>,
    pub tau: usize,
    /// `|(w_t - z_hat_t) / nu|` for every outer iteration.
    pub prox_grad_norms: Vec<f64>,
}

pub fn run_alexr2(
    problem: &dyn FccoProblem,
    w0: &[f64],
    config: &Alexr2Config,
    rng: &SeededRng,
    monitor: &mut dyn Monitor,
) -> Result<Alexr2Run, Failure> {
    config.validate(problem)?;
    if w0.len() != problem.dim() {
        return Err(Error::config("initial point has the wrong dimension").into());
    }
    if !linalg::all_finite(w0) {
        return Err(Error::config("initial point has non-finite entries").into());
    }
    let t_max = config.iterations;
    let every = config.metric_every.unwrap_or_else(|| default_metric_every(t_max));
    let mut rec = Recorder::new(every, config.lambda, monitor);
    let mut norms = Vec::with_capacity(t_max);
    match alexr2_loop(problem, w0, config, rng, &mut rec, &mut norms) {
        Ok((w_final, w_output, tau)) => Ok(Alexr2Run {
            trace: rec.trace,
            w_final,
            w_output,
            tau,
            prox_grad_norms: norms,
        }),
        Err(e) => Err(rec.fail(e)),
    }
}

fn alexr2_loop(
    problem: &dyn FccoProblem,
    w0: &[f64],
    config: &Alexr2Config,
    rng: &SeededRng,
    rec: &mut Recorder<'_>,
    norms: &mut Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let n = problem.num_components();
    let d = problem.dim();
    let t_max = config.iterations;
    let params = InnerParams::from(config);
    let tau = if t_max == 0 {
        0
    } else {
        rng.derive(&[tag::OUTPUT_INDEX]).index_inclusive(1, t_max)
    };
    let mut counters = Counters::default();
    let mut w = w0.to_vec();
    let mut v = vec![0.0; d];
    let mut s = vec![0.0; d];
    let mut dir = vec![0.0; d];
    let mut w_output = w0.to_vec();
    let mut u = init_duals(problem, &w, config.b2, &rng.derive(&[tag::DUAL_INIT, 0]))?;
    counters.inner_oracle_calls += n as u64;

    rec.record(problem, &w, 0, counters)?;
    for t in 0..t_max {
        let t64 = t as u64;
        if t > 0 && !config.warm_start_dual {
            u = init_duals(problem, &w, config.b2, &rng.derive(&[tag::DUAL_INIT, t64]))?;
            counters.inner_oracle_calls += n as u64;
        }
        let inner_rng = rng.derive(&[tag::INNER_RUN, t64]);
        let z_hat = run_inner_alexr(problem, &w, &params, config.inner.at(t), &inner_rng, &mut u, &mut counters)
            .map_err(|e| match e {
                Error::NonFinite { what, .. } => Error::NonFinite { iteration: t + 1, what },
                other => other,
            })?;
        for j in 0..d {
            dir[j] = (w[j] - z_hat[j]) / config.nu;
        }
        norms.push(linalg::norm(&dir));
        match &config.update {
            UpdateKind::Momentum => {
                outer_momentum_step(&mut w, &z_hat, &mut v, config.beta, config.alpha, config.nu, config.literal_step12)
            }
            UpdateKind::Adam { adam } => {
                if config.literal_step12 {
                    linalg::scale(config.beta, &mut dir);
                }
                adam_step(&mut w, &mut v, &mut s, &dir, config.beta, adam, config.alpha);
            }
            UpdateKind::SgdBaseline => linalg::axpy(-config.alpha, &dir, &mut w),
        }
        if !linalg::all_finite(&w) || !linalg::all_finite(&v) {
            return Err(Error::NonFinite {
                iteration: t + 1,
                what: "iterate",
            });
        }
        if t + 1 == tau {
            w_output.copy_from_slice(&w);
        }
        rec.iterate(t + 1, &w);
        if rec.due(t + 1, t_max) {
            rec.record(problem, &w, t + 1, counters)?;
        }
    }
    Ok((w, w_output, tau))
}

/// One long inner run from `w` with smoothing `lambda_refine`, started from
/// cold duals. Needs smooth inner maps.
pub fn refine_with_alexr(
    problem: &dyn FccoProblem,
    w: &[f64],
    config: &Alexr2Config,
    lambda_refine: f64,
    k: usize,
    rng: &SeededRng,
) -> Result<Vec<f64>> {
    if problem.regularity().smoothness.is_none() {
        return Err(Error::Assumption("refinement needs smooth inner maps".into()));
    }
    let mut cfg = *config;
    cfg.lambda = lambda_refine;
    cfg.validate(problem)?;
    let refine_rng = rng.derive(&[tag::INNER_RUN, u64::MAX]);
    let mut u = init_duals(problem, w, cfg.b2, &refine_rng)?;
    let mut counters = Counters::default();
    run_inner_alexr(problem, w, &InnerParams::from(&cfg), k, &refine_rng, &mut u, &mut counters)
}
