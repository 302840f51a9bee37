//! Single-loop method on the outer-smoothed objective
//! `F_lambda(w) = (1/n) sum_i f_{i,lambda}(g_i(w)) + h0(w)`.
//!
//! Each iteration samples `B1` components, refreshes their inner-value trackers
//! with the variance-reduced moving average
//! `u <- (1 - gamma) u + gamma g(w_t) + gamma' (g(w_t) - g(w_{t-1}))`
//! (both values on the same batch), forms
//! `G = mean_i J_i(w_t)^T grad f_{i,lambda}(u_i)` and takes a momentum or
//! Adam-type step. `UpdateKind::SgdBaseline` skips the momentum buffer.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Failure, Result};
use crate::linalg;
use crate::problem::{self, FccoProblem};
use crate::rng::{sample_components, sample_data_batch, tag, SeededRng};
use crate::smoothing::moreau_grad;
use crate::trace::{default_metric_every, Counters, Monitor, Recorder, SolverTrace};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct AdamConfig {
    /// Second-moment mixing weight `beta'` in `s <- (1 - beta') s + beta' G^2`,
    /// i.e. one minus the usual Adam `beta2`.
    pub beta2: f64,
    pub eps_num: f64,
    /// Optional `[c_l, c_u]`: effective step sizes are clamped into
    /// `[eta * c_l, eta * c_u]`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub clip: Option<[f64; 2]>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta2: 0.001,
            eps_num: 1e-8,
            clip: None,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::config("adam beta2 must lie in (0, 1)"));
        }
        if !(self.eps_num > 0.0) {
            return Err(Error::config("adam eps_num must be positive"));
        }
        if let Some([lo, hi]) = self.clip {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::config("adam clip bounds need 0 < c_l <= c_u"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum UpdateKind {
    #[default]
    Momentum,
    Adam {
        #[cfg_attr(feature = "serde", serde(flatten))]
        adam: AdamConfig,
    },
    SgdBaseline,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct SonexConfig {
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub eta: f64,
    pub b1: usize,
    pub b2: usize,
    pub iterations: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub update: UpdateKind,
    /// Exact-metric cadence; `None` means `max(1, T / 200)`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub metric_every: Option<usize>,
}

impl SonexConfig {
    pub fn validate(&self, problem: &dyn FccoProblem) -> Result<()> {
        problem::validate_shapes(problem)?;
        let n = problem.num_components();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be positive"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::config("beta must lie in (0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma must lie in (0, 1]"));
        }
        if !(self.gamma_prime >= 0.0 && self.gamma_prime.is_finite()) {
            return Err(Error::config("gamma_prime must be nonnegative"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta must be positive"));
        }
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
        if problem.regularity().smoothness.is_none() {
            return Err(Error::Assumption(
                "the single-loop method needs smooth inner functions; use the double-loop method".into(),
            ));
        }
        Ok(())
    }
}

/// `1 - gamma + (n - B1) / (B1 (1 - gamma))`.
pub fn msvr_correction_default(n: usize, b1: usize, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma < 1.0) {
        return Err(Error::config(alloc::format!("default correction needs gamma in [0, 1), got {gamma}")));
    }
    if b1 == 0 || b1 > n {
        return Err(Error::config("default correction needs 1 <= B1 <= n"));
    }
    Ok(1.0 - gamma + (n - b1) as f64 / (b1 as f64 * (1.0 - gamma)))
}

/// Hyperparameters at the orders the analysis prescribes for target accuracy
/// `eps`; `scale` multiplies the unspecified constants. `iterations` is left
/// at 0 for the caller to fill.
pub fn theory_hyperparams(eps: f64, n: usize, b1: usize, b2: usize, c_f: f64, scale: f64) -> Result<SonexConfig> {
    if !(eps > 0.0 && scale > 0.0 && c_f > 0.0) {
        return Err(Error::config("eps, scale and C_f must be positive"));
    }
    let beta = (scale * b1.min(b2) as f64 * eps * eps).min(2.0 / 7.0);
    let gamma = (scale * b2 as f64 * libm::pow(eps, 4.0)).min(0.5);
    let eta = scale * b1 as f64 * libm::sqrt(b2 as f64) * libm::pow(eps, 3.0) / n as f64;
    Ok(SonexConfig {
        lambda: eps / c_f,
        beta,
        gamma,
        gamma_prime: msvr_correction_default(n, b1, gamma)?,
        eta,
        b1,
        b2,
        iterations: 0,
        update: UpdateKind::Momentum,
        metric_every: None,
    })
}

/// `u_i = g_i(w0; B_i)` with one batch of size `b2` per component, as a
/// row-major `n x d1` block.
pub fn init_trackers(problem: &dyn FccoProblem, w0: &[f64], b2: usize, rng: &SeededRng) -> Result<Vec<f64>> {
    let d1 = problem.inner_dim();
    let mut u = vec![0.0; problem.num_components() * d1];
    for (i, row) in u.chunks_mut(d1).enumerate() {
        let batch = sample_data_batch(&mut rng.derive(&[tag::TRACKER_INIT, i as u64]), problem.population(i), b2)?;
        problem.inner_value(i, w0, &batch, row)?;
    }
    Ok(u)
}

/// `u <- (1 - gamma) u + gamma g_new + gamma' (g_new - g_prev)`.
pub fn msvr_update(u: &mut [f64], g_new: &[f64], g_prev: &[f64], gamma: f64, gamma_prime: f64) {
    for j in 0..u.len() {
        u[j] = (1.0 - gamma) * u[j] + gamma * g_new[j] + gamma_prime * (g_new[j] - g_prev[j]);
    }
}

/// `G = (1/|B1|) sum_{i in B1} inner_vjp(i, w, batch_i, grad f_{i,lambda}(u_i))`,
/// plus the additive gradient on `additive_batch` when the problem has one.
/// `u` is the full `n x d1` tracker block; `batches[k]` belongs to
/// `components[k]`.
pub fn gradient_estimate(
    problem: &dyn FccoProblem,
    w: &[f64],
    u: &[f64],
    components: &[usize],
    batches: &[Vec<usize>],
    lambda: f64,
    additive_batch: Option<&[usize]>,
    out: &mut [f64],
) -> Result<()> {
    let d1 = problem.inner_dim();
    let mut y = vec![0.0; d1];
    let mut tmp = vec![0.0; w.len()];
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&i, batch) in components.iter().zip(batches) {
        moreau_grad(&problem.outer(i), lambda, &u[i * d1..(i + 1) * d1], &mut y)?;
        problem.inner_vjp(i, w, batch, &y, &mut tmp)?;
        linalg::axpy(1.0, &tmp, out);
    }
    linalg::scale(1.0 / components.len() as f64, out);
    if problem.has_additive() {
        if let Some(batch) = additive_batch {
            problem.additive_grad(w, batch, &mut tmp)?;
            linalg::axpy(1.0, &tmp, out);
        }
    }
    Ok(())
}

/// `v <- (1 - beta) v + beta G`, then `w <- w - eta v`.
pub fn momentum_step(w: &mut [f64], v: &mut [f64], g: &[f64], beta: f64, eta: f64) {
    for j in 0..w.len() {
        v[j] = (1.0 - beta) * v[j] + beta * g[j];
        w[j] -= eta * v[j];
    }
}

/// Adam-type step. The momentum buffer is updated as in [`momentum_step`];
/// the per-coordinate step `eta / (sqrt(s) + eps_num)` uses the second moment
/// from before this iteration, which is then refreshed with `G^2`.
pub fn adam_step(w: &mut [f64], v: &mut [f64], s: &mut [f64], g: &[f64], beta: f64, adam: &AdamConfig, eta: f64) {
    for j in 0..w.len() {
        v[j] = (1.0 - beta) * v[j] + beta * g[j];
        let mut step = eta / (libm::sqrt(s[j]) + adam.eps_num);
        if let Some([lo, hi]) = adam.clip {
            step = step.clamp(eta * lo, eta * hi);
        }
        w[j] -= step * v[j];
        s[j] = (1.0 - adam.beta2) * s[j] + adam.beta2 * g[j] * g[j];
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SonexRun {
    pub trace: SolverTrace,
    pub w_final: Vec<f64>,
    /// The uniformly sampled iterate `w_tau`, `tau` in `1..=T` (`w0` when `T = 0`).
    pub w_output: Vec<f64>,
    pub tau: usize,
}

fn non_finite(iteration: usize, what: &'static str) -> Error {
    Error::NonFinite { iteration, what }
}

pub fn run_sonex(
    problem: &dyn FccoProblem,
    w0: &[f64],
    config: &SonexConfig,
    rng: &SeededRng,
    monitor: &mut dyn Monitor,
) -> Result<SonexRun, Failure> {
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
    match sonex_loop(problem, w0, config, rng, &mut rec, t_max) {
        Ok((w_final, w_output, tau)) => Ok(SonexRun {
            trace: rec.trace,
            w_final,
            w_output,
            tau,
        }),
        Err(e) => Err(rec.fail(e)),
    }
}

fn sonex_loop(
    problem: &dyn FccoProblem,
    w0: &[f64],
    config: &SonexConfig,
    rng: &SeededRng,
    rec: &mut Recorder<'_>,
    t_max: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let n = problem.num_components();
    let d = problem.dim();
    let d1 = problem.inner_dim();
    let tau = if t_max == 0 {
        0
    } else {
        rng.derive(&[tag::OUTPUT_INDEX]).index_inclusive(1, t_max)
    };

    let mut counters = Counters::default();
    let mut u = init_trackers(problem, w0, config.b2, rng)?;
    counters.inner_oracle_calls += n as u64;
    let mut w = w0.to_vec();
    let mut prev_w = w0.to_vec();
    let mut v = vec![0.0; d];
    let mut s = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut g_new = vec![0.0; d1];
    let mut g_prev = vec![0.0; d1];
    let mut w_output = w0.to_vec();
    let add_batch = config.b2.min(problem.additive_population());

    rec.record(problem, &w, 0, counters)?;
    for t in 0..t_max {
        let t64 = t as u64;
        let components = sample_components(&mut rng.derive(&[tag::COMPONENTS, t64]), n, config.b1)?;
        counters.component_draws += components.len() as u64;
        let mut batches = Vec::with_capacity(components.len());
        for &i in &components {
            let batch =
                sample_data_batch(&mut rng.derive(&[tag::VALUE_BATCH, t64, i as u64]), problem.population(i), config.b2)?;
            problem.inner_value(i, &w, &batch, &mut g_new)?;
            problem.inner_value(i, &prev_w, &batch, &mut g_prev)?;
            let row = &mut u[i * d1..(i + 1) * d1];
            msvr_update(row, &g_new, &g_prev, config.gamma, config.gamma_prime);
            if !linalg::all_finite(row) {
                return Err(non_finite(t + 1, "tracker"));
            }
            batches.push(batch);
        }
        let additive = if problem.has_additive() {
            Some(sample_data_batch(
                &mut rng.derive(&[tag::ADDITIVE_BATCH, t64]),
                problem.additive_population(),
                add_batch,
            )?)
        } else {
            None
        };
        gradient_estimate(problem, &w, &u, &components, &batches, config.lambda, additive.as_deref(), &mut g)?;
        counters.inner_oracle_calls += 3 * components.len() as u64;
        if !linalg::all_finite(&g) {
            return Err(non_finite(t + 1, "gradient estimate"));
        }

        prev_w.copy_from_slice(&w);
        match &config.update {
            UpdateKind::Momentum => momentum_step(&mut w, &mut v, &g, config.beta, config.eta),
            UpdateKind::Adam { adam } => adam_step(&mut w, &mut v, &mut s, &g, config.beta, adam, config.eta),
            UpdateKind::SgdBaseline => linalg::axpy(-config.eta, &g, &mut w),
        }
        if !linalg::all_finite(&w) || !linalg::all_finite(&v) {
            return Err(non_finite(t + 1, "iterate"));
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
