//! Acceptance suite. Each criterion prints one `[PASS]`/`[FAIL]` line; the
//! process exits nonzero if any fails.
//!
//! Run with `cargo test -p fcco --test acceptance`.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fcco::config::RunConfig;
use fcco::run::{execute, write_outputs};
use fcco_core::alexr2::{init_duals, run_alexr2, run_inner_alexr, Alexr2Config, InnerParams, InnerSchedule};
use fcco_core::metrics::{
    brute_force_prox, eval_exact, finite_difference_gradient, grad_f_lambda_exact, gram_min_eigenvalue,
    stationarity_report,
};
use fcco_core::penalty::{
    build_penalty_problem, exact_penalty_value, kkt_report, max_violation, singular_value_min, smoothed_penalty_value,
    ConstrainedProblem,
};
use fcco_core::problems::*;
use fcco_core::rng::sample_data_batch;
use fcco_core::smoothing::{moreau_grad, moreau_value};
use fcco_core::sonex::{init_trackers, msvr_correction_default, msvr_update, run_sonex, theory_hyperparams, SonexConfig, UpdateKind};
use fcco_core::trace::{Counters, Silent};
use fcco_core::{linalg, FccoProblem, Monitor, OuterFunction, Regularity, Result, SeededRng};
use nalgebra::DMatrix;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------------------
// shared fixtures

/// `g(z) = z` in one dimension with a single outer function.
struct Line(OuterFunction);

impl FccoProblem for Line {
    fn num_components(&self) -> usize {
        1
    }
    fn dim(&self) -> usize {
        1
    }
    fn inner_dim(&self) -> usize {
        1
    }
    fn outer(&self, _i: usize) -> OuterFunction {
        self.0
    }
    fn population(&self, _i: usize) -> usize {
        1
    }
    fn inner_value(&self, _i: usize, w: &[f64], _batch: &[usize], out: &mut [f64]) -> Result<()> {
        out[0] = w[0];
        Ok(())
    }
    fn inner_vjp(&self, _i: usize, _w: &[f64], _batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = y[0];
        Ok(())
    }
    fn inner_exact(&self, _i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = w[0];
        Ok(())
    }
    fn inner_jacobian_exact(&self, _i: usize, _w: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = 1.0;
        Ok(())
    }
    fn regularity(&self) -> Regularity {
        Regularity {
            lipschitz: 1.0,
            smoothness: Some(0.0),
            weak_convexity: Some(0.0),
            additive_weak_convexity: 0.0,
        }
    }
}

/// Keeps the last `cap` iterates.
struct Tail {
    cap: usize,
    iterates: Vec<Vec<f64>>,
}

impl Monitor for Tail {
    fn on_iterate(&mut self, _iteration: usize, w: &[f64]) {
        if self.iterates.len() == self.cap {
            self.iterates.remove(0);
        }
        self.iterates.push(w.to_vec());
    }
}

/// Largest `exact penalty - Phi_lambda` and smallest value seen over every iterate.
struct GapWatch<'a> {
    cp: &'a dyn ConstrainedProblem,
    rho: f64,
    lambda: f64,
    worst: f64,
    lowest: f64,
    count: usize,
}

impl GapWatch<'_> {
    fn observe(&mut self, w: &[f64]) {
        let gap = exact_penalty_value(self.cp, w, self.rho).unwrap()
            - smoothed_penalty_value(self.cp, w, self.rho, self.lambda).unwrap();
        self.worst = self.worst.max(gap);
        self.lowest = self.lowest.min(gap);
        self.count += 1;
    }
}

impl Monitor for GapWatch<'_> {
    fn on_iterate(&mut self, _iteration: usize, w: &[f64]) {
        self.observe(w);
    }
}

/// `argmin_z f(z) + (z - w)^2 / (2 nu)` by a fine grid and golden-section refinement.
fn prox_1d<F: Fn(f64) -> f64>(f: F, w: f64, nu: f64) -> f64 {
    let obj = |z: f64| f(z) + (z - w) * (z - w) / (2.0 * nu);
    let (lo, hi, steps) = (w - 3.0, w + 3.0, 60_000);
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps).min_by(|&a, &b| obj(lo + h * a as f64).total_cmp(&obj(lo + h * b as f64))).unwrap();
    let (mut a, mut b) = (lo + h * (best as f64 - 1.0), lo + h * (best as f64 + 1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-13 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if obj(x1) <= obj(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    0.5 * (a + b)
}

fn catalog(rng: &mut SeededRng) -> Vec<(&'static str, OuterFunction)> {
    vec![
        ("scaled_hinge", OuterFunction::ScaledHinge { rho: 0.1 + 4.9 * rng.uniform() }),
        ("cvar_hinge", OuterFunction::CvarHinge { ratio: 0.05 + 0.95 * rng.uniform() }),
        (
            "gap_hinge",
            OuterFunction::GapHinge {
                kappa: rng.uniform(),
                scale: 0.2 + 2.8 * rng.uniform(),
            },
        ),
        ("identity", OuterFunction::Identity),
    ]
}

fn random_point(rng: &mut SeededRng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * (2.0 * rng.uniform() - 1.0)).collect()
}

// ---------------------------------------------------------------------------
// criteria

fn c1_prox_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = SeededRng::new(101, 0);
    let mut worst: f64 = 0.0;
    let mut per = Vec::new();
    for k in 0..4 {
        let mut local: f64 = 0.0;
        let mut name = "";
        for _ in 0..100 {
            let (label, f) = catalog(&mut rng)[k];
            name = label;
            let t = random_point(&mut rng, f.input_dim(), 3.0);
            let lam = 1e-3 + (1.0 - 1e-3) * rng.uniform();
            let mut p = vec![0.0; t.len()];
            f.prox(lam, &t, &mut p).unwrap();
            let grid = brute_force_prox(&f, lam, &t, 1e-5).unwrap();
            let err = p.iter().zip(&grid).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            local = local.max(err);
        }
        per.push(format!("{name}={local:.1e}"));
        worst = worst.max(local);
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-6 && within(elapsed, 10.0),
        format!("max |prox - grid| {worst:.2e} (<= 1e-6) [{}], {:.1}s (< 10s)", per.join(" "), elapsed.as_secs_f64()),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt() / linalg::norm(b).max(1e-12)
}

fn fd_check(p: &dyn FccoProblem, w: &[f64], lam: f64) -> f64 {
    let grad = grad_f_lambda_exact(p, w, lam).unwrap();
    let fd = finite_difference_gradient(|x| eval_exact(p, x, lam).unwrap().f_lambda, w, 1e-6);
    rel_err(&grad, &fd)
}

fn c2_gradients() -> Verdict {
    let start = Instant::now();
    let mut rng = SeededRng::new(202, 0);
    let mut synth: f64 = 0.0;
    for seed in 0..10 {
        let spec = SyntheticSpec::new(8, 10, 2, InnerFamily::quadratic(), OuterFunction::gap_hinge(0.05), 300 + seed);
        let p = make_synthetic_fcco(&spec).unwrap();
        let w = random_point(&mut rng, 10, 1.0);
        synth = synth.max(fd_check(&p, &w, 0.05));
    }
    let mut roc: f64 = 0.0;
    let mut spec = RocSpec::new(vec![-0.5, 0.0, 0.5], 0.05, 9);
    spec.per_class = 12;
    let p = build_penalty_problem(make_roc_fairness_toy(&spec).unwrap(), 10.0, 0.01).unwrap();
    for _ in 0..5 {
        let w = random_point(&mut rng, p.dim(), 2.0);
        roc = roc.max(fd_check(&p, &w, 0.01));
    }
    let elapsed = start.elapsed();
    verdict(
        synth <= 1e-5 && roc <= 1e-5 && within(elapsed, 30.0),
        format!(
            "max rel err synthetic {synth:.2e}, roc {roc:.2e} (<= 1e-5), {:.1}s (< 30s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn c3_moreau_identities() -> Verdict {
    let mut rng = SeededRng::new(303, 0);
    let (mut min_gap, mut gradient_identity, mut sandwich_excess, mut subgrad_excess) =
        (f64::INFINITY, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..4 {
        for _ in 0..1000 {
            let f = catalog(&mut rng)[k].1;
            let dim = f.input_dim();
            let t = random_point(&mut rng, dim, 3.0);
            let lam = 1e-3 + (1.0 - 1e-3) * rng.uniform();
            let (mut p, mut y) = (vec![0.0; dim], vec![0.0; dim]);
            f.prox(lam, &t, &mut p).unwrap();
            moreau_grad(&f, lam, &t, &mut y).unwrap();
            // y = (t - prox) / lambda
            for j in 0..dim {
                gradient_identity = gradient_identity.max((y[j] - (t[j] - p[j]) / lam).abs());
            }
            // prox minimizes f(v) + |v - t|^2 / (2 lambda): compare against perturbations
            let obj = |v: &[f64]| f.value(v) + dist2(v, &t) / (2.0 * lam);
            for _ in 0..3 {
                let v: Vec<f64> = p.iter().map(|x| x + 0.3 * (2.0 * rng.uniform() - 1.0)).collect();
                min_gap = min_gap.min(obj(&v) - obj(&p));
                // y is a subgradient of f at the prox point: f(v) >= f(p) + y.(v - p)
                let lin: f64 = y.iter().zip(v.iter().zip(&p)).map(|(yi, (vi, pi))| yi * (vi - pi)).sum();
                subgrad_excess = subgrad_excess.max(f.value(&p) + lin - f.value(&v));
            }
            let env = moreau_value(&f, lam, &t).unwrap();
            let c = f.lipschitz();
            sandwich_excess = sandwich_excess
                .max(env - f.value(&t))
                .max(f.value(&t) - env - lam * c * c / 2.0);
        }
    }
    let tol = 1e-10;
    verdict(
        min_gap >= -tol && gradient_identity <= tol && subgrad_excess <= tol && sandwich_excess <= tol,
        format!(
            "4000 points: min prox-objective margin {min_gap:.1e}, |y - (t - prox)/lambda| {gradient_identity:.1e}, \
             subgradient excess {subgrad_excess:.1e}, sandwich excess {sandwich_excess:.1e} (tolerance {tol:.0e})"
        ),
    )
}

fn quadratic_hinge(sigma0: f64, population: usize) -> SyntheticFcco {
    let spec = SyntheticSpec {
        sigma0,
        population,
        ..SyntheticSpec::new(20, 10, 1, InnerFamily::quadratic(), OuterFunction::ScaledHinge { rho: 1.0 }, 7)
    };
    make_synthetic_fcco(&spec).unwrap()
}

fn c4_sonex_convergence() -> Verdict {
    let start = Instant::now();
    let iterations = 100_000;
    let eps = 0.05;

    let p = quadratic_hinge(0.0, 1);
    let cfg = SonexConfig {
        iterations,
        metric_every: Some(1000),
        ..theory_hyperparams(eps, 20, 20, 1, 1.0, 1.0).unwrap()
    };
    let run = run_sonex(&p, &[0.0; 10], &cfg, &SeededRng::new(1, 0), &mut Silent).unwrap();
    let first = run.trace.rows().iter().find(|r| r.grad_norm.unwrap() <= 1e-3).map(|r| r.iteration);
    let final_grad = stationarity_report(&p, &run.w_final, cfg.lambda, false).unwrap().grad_f_lambda_norm;

    let noisy = quadratic_hinge(0.1, 64);
    let cfg = SonexConfig {
        iterations,
        metric_every: Some(iterations),
        ..theory_hyperparams(eps, 20, 20, 4, 1.0, 1.0).unwrap()
    };
    let mut tail = Tail {
        cap: 100,
        iterates: Vec::new(),
    };
    run_sonex(&noisy, &[0.0; 10], &cfg, &SeededRng::new(1, 0), &mut tail).unwrap();
    let avg = tail
        .iterates
        .iter()
        .map(|w| stationarity_report(&noisy, w, cfg.lambda, false).unwrap().approx_grad_residual)
        .sum::<f64>()
        / tail.iterates.len() as f64;
    let elapsed = start.elapsed();
    verdict(
        first.is_some() && avg <= 1e-2 && within(elapsed, 120.0),
        format!(
            "noiseless: |grad F_lambda| <= 1e-3 first at t = {}, {final_grad:.2e} at t = 1e5; \
             noisy (B1 = 20, B2 = 4): trailing-100 mean residual {avg:.2e} (<= 1e-2); {:.1}s (< 120s)",
            first.map_or("never".into(), |t| t.to_string()),
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_msvr_tracking() -> Verdict {
    let (n, b2, gamma, sigma0, seeds, horizon) = (5, 4, 0.05, 0.1, 30, 1000);
    let spec = SyntheticSpec {
        sigma0,
        ..SyntheticSpec::new(n, 3, 1, InnerFamily::Affine, OuterFunction::ScaledHinge { rho: 1.0 }, 4)
    };
    let p = make_synthetic_fcco(&spec).unwrap();
    let gamma_prime = msvr_correction_default(n, n, gamma).unwrap();
    let w = [0.2, -0.1, 0.4];
    let exact: Vec<f64> = (0..n)
        .map(|i| {
            let mut g = [0.0];
            p.inner_exact(i, &w, &mut g).unwrap();
            g[0]
        })
        .collect();
    // per-seed mean tracker error at every iteration
    let mut errs = vec![vec![0.0; seeds]; horizon + 1];
    for s in 0..seeds {
        let rng = SeededRng::new(500 + s as u64, 0);
        let mut u = init_trackers(&p, &w, b2, &rng).unwrap();
        let mut draw = rng.derive(&[77]);
        errs[0][s] = dist2(&u, &exact) / n as f64;
        let mut g = [0.0];
        for t in 1..=horizon {
            for i in 0..n {
                let batch = sample_data_batch(&mut draw, p.population(i), b2).unwrap();
                p.inner_value(i, &w, &batch, &mut g).unwrap();
                // frozen w: the correction term compares equal values
                msvr_update(&mut u[i..i + 1], &g, &g, gamma, gamma_prime);
            }
            errs[t][s] = dist2(&u, &exact) / n as f64;
        }
    }
    let bound = 10.0 * gamma * sigma0 * sigma0 / b2 as f64;
    let stats = |row: &[f64]| {
        let m = row.iter().sum::<f64>() / row.len() as f64;
        let var = row.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (row.len() - 1) as f64;
        (m, (var / row.len() as f64).sqrt())
    };
    let (m0, _) = stats(&errs[0]);
    // one-sided test: mean + 2 standard errors below the bound
    let first = (0..=horizon).find(|&t| {
        let (m, se) = stats(&errs[t]);
        m + 2.0 * se < bound
    });
    let (m_end, se_end) = stats(&errs[horizon]);
    verdict(
        first.is_some() && m_end + 2.0 * se_end < bound,
        format!(
            "bound 10 gamma sigma0^2 / B2 = {bound:.2e}; mean error {m0:.2e} at t = 0, below bound (mean + 2 se) from t = {}, \
             {m_end:.2e} +- {se_end:.1e} at t = {horizon} ({seeds} seeds)",
            first.map_or("never".into(), |t| t.to_string())
        ),
    )
}

fn c6_inner_loop() -> Verdict {
    let hinge = OuterFunction::ScaledHinge { rho: 1.0 };
    let line = Line(hinge);
    let (lam, nu, w) = (0.1, 0.5, 1.0);
    let target = prox_1d(|z| moreau_value(&hinge, lam, &[z]).unwrap(), w, nu);
    let params = InnerParams {
        lambda: lam,
        nu,
        eta: 0.1,
        theta: 0.5,
        gamma: 0.5,
        b1: 1,
        b2: 1,
    };
    let mut u = vec![w];
    let z = run_inner_alexr(&line, &[w], &params, 500, &SeededRng::new(1, 0), &mut u, &mut Counters::default()).unwrap();
    let prox_err = (z[0] - target).abs();

    // Identity outer over quadratic inner maps: the subproblem is a strongly
    // convex quadratic with a closed-form solution per coordinate.
    let (n, d) = (6, 4);
    let spec = SyntheticSpec::new(n, d, 1, InnerFamily::quadratic(), OuterFunction::Identity, 13);
    let p = make_synthetic_fcco(&spec).unwrap();
    let w = vec![0.5, -0.5, 1.0, 0.2];
    let (mut at0, mut at1) = (vec![0.0; d], vec![0.0; d]);
    let (mut mean_a, mut mean_q) = (vec![0.0; d], vec![0.0; d]);
    for i in 0..n {
        p.inner_jacobian_exact(i, &vec![0.0; d], &mut at0).unwrap();
        p.inner_jacobian_exact(i, &vec![1.0; d], &mut at1).unwrap();
        for j in 0..d {
            mean_a[j] += at0[j] / n as f64;
            mean_q[j] += (at1[j] - at0[j]) / n as f64;
        }
    }
    let z_star: Vec<f64> = (0..d).map(|j| (w[j] / nu - mean_a[j]) / (mean_q[j] + 1.0 / nu)).collect();
    let params = InnerParams {
        lambda: 0.1,
        nu,
        eta: 0.05,
        theta: 0.5,
        gamma: 0.5,
        b1: n,
        b2: 64,
    };
    let ks = [5.0, 10.0, 20.0, 40.0, 80.0];
    let errs: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let mut u = init_duals(&p, &w, 64, &SeededRng::new(1, 0)).unwrap();
            let z = run_inner_alexr(&p, &w, &params, k as usize, &SeededRng::new(1, 0), &mut u, &mut Counters::default())
                .unwrap();
            dist2(&z, &z_star).sqrt()
        })
        .collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mk = ks.iter().sum::<f64>() / ks.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = ks.iter().zip(&ys).map(|(k, y)| (k - mk) * (y - my)).sum::<f64>()
        / ks.iter().map(|k| (k - mk) * (k - mk)).sum::<f64>();
    let factor = slope.exp();
    verdict(
        prox_err <= 1e-4 && factor < 1.0,
        format!(
            "1-D hinge: |z_hat - prox| = {prox_err:.2e} (<= 1e-4) at K = 500, grid prox {target:.6}; \
             quadratic saddle: fitted factor {factor:.4} per step (< 1), errors {:.1e} .. {:.1e}",
            errs[0],
            errs[errs.len() - 1]
        ),
    )
}

fn constrained_alexr2(lambda: f64, m: usize) -> Alexr2Config {
    Alexr2Config {
        lambda,
        nu: 0.5,
        eta: 1e-3,
        theta: 0.5,
        gamma: 0.1,
        beta: 0.5,
        alpha: 0.5,
        inner: InnerSchedule::Constant { k: 50 },
        iterations: 200,
        b1: m,
        b2: 1,
        warm_start_dual: true,
        literal_step12: false,
        update: UpdateKind::Momentum,
        metric_every: None,
    }
}

fn constrained_sonex(lambda: f64) -> SonexConfig {
    SonexConfig {
        lambda,
        beta: 0.5,
        gamma: 1.0,
        gamma_prime: 0.0,
        eta: 3e-4,
        b1: 1,
        b2: 1,
        iterations: 20_000,
        update: UpdateKind::Momentum,
        metric_every: None,
    }
}

struct ToyResult {
    label: &'static str,
    dist: f64,
    stationarity: f64,
    violation: f64,
    multiplier: f64,
    nu_star: f64,
}

impl ToyResult {
    fn pass(&self, eps: f64) -> bool {
        self.dist <= 1e-2 && self.stationarity <= 5e-2 && self.violation <= 1.1 * eps
    }

    fn describe(&self) -> String {
        format!(
            "{}: |w - w*| {:.1e}, KKT stat {:.1e}, viol {:.2e}, nu {:.4} (nu* {})",
            self.label, self.dist, self.stationarity, self.violation, self.multiplier, self.nu_star
        )
    }
}

fn toy_result(
    label: &'static str,
    cp: &dyn ConstrainedProblem,
    w: &[f64],
    w_star: &[f64],
    nu_star: f64,
    rho: f64,
    lambda: f64,
) -> ToyResult {
    let kkt = kkt_report(cp, w, rho, lambda).unwrap();
    ToyResult {
        label,
        dist: dist2(w, w_star).sqrt(),
        stationarity: kkt.stationarity,
        violation: max_violation(cp, w).unwrap(),
        multiplier: kkt.multipliers[0],
        nu_star,
    }
}

fn c7_constrained_toys() -> Verdict {
    let (rho, eps) = (20.0, 0.01);
    let lambda = eps / rho;
    let mut results = Vec::new();
    let mut slowest: f64 = 0.0;

    for (label, kind, w0, w_star, nu_star) in [
        ("qp_box/alexr2", ToyKind::qp_box_1d(), vec![0.0], vec![1.0], 2.0),
        ("circle/alexr2", ToyKind::circle(), vec![0.0, 0.5], vec![1.0, 0.0], 1.0),
    ] {
        let start = Instant::now();
        let p = build_penalty_problem(make_toy_constrained(&kind).unwrap(), rho, lambda).unwrap();
        let run = run_alexr2(&p, &w0, &constrained_alexr2(lambda, 1), &SeededRng::new(1, 0), &mut Silent).unwrap();
        results.push(toy_result(label, p.constrained(), &run.w_final, &w_star, nu_star, rho, lambda));
        slowest = slowest.max(start.elapsed().as_secs_f64());
    }
    let start = Instant::now();
    let p = build_penalty_problem(make_toy_constrained(&ToyKind::circle()).unwrap(), rho, lambda).unwrap();
    let run = run_sonex(&p, &[0.0, 0.5], &constrained_sonex(lambda), &SeededRng::new(1, 0), &mut Silent).unwrap();
    results.push(toy_result("circle/sonex", p.constrained(), &run.w_final, &[1.0, 0.0], 1.0, rho, lambda));
    slowest = slowest.max(start.elapsed().as_secs_f64());

    let pass = results.iter().all(|r| r.pass(eps)) && slowest < 120.0;
    let lines: Vec<String> = results.iter().map(|r| r.describe()).collect();
    verdict(
        pass,
        format!("rho = 20, eps = 0.01, lambda = 5e-4; {}; slowest run {slowest:.1}s (< 120s)", lines.join("; ")),
    )
}

fn c8_penalty_exactness() -> Verdict {
    let (rho, lambda) = (20.0, 5e-4);
    let bound = lambda * rho * rho / 2.0;
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, kind, w0) in [
        ("qp_box", ToyKind::qp_box_1d(), vec![3.0]),
        ("circle", ToyKind::circle(), vec![0.0, 2.5]),
        ("weakly_convex_1d", ToyKind::WeaklyConvex1d, vec![3.0]),
    ] {
        let cp = make_toy_constrained(&kind).unwrap();
        let p = build_penalty_problem(cp.clone(), rho, lambda).unwrap();
        let mut watch = GapWatch {
            cp: &cp,
            rho,
            lambda,
            worst: f64::NEG_INFINITY,
            lowest: f64::INFINITY,
            count: 0,
        };
        watch.observe(&w0);
        let cfg = Alexr2Config {
            nu: 0.02,
            alpha: 0.02,
            iterations: 300,
            ..constrained_alexr2(lambda, 1)
        };
        match run_alexr2(&p, &w0, &cfg, &SeededRng::new(2, 0), &mut watch) {
            Ok(_) => {}
            Err(e) => {
                pass = false;
                parts.push(format!("{label}: run failed: {e}"));
                continue;
            }
        }
        if matches!(kind, ToyKind::Circle { .. }) {
            run_sonex(&p, &w0, &constrained_sonex(lambda), &SeededRng::new(2, 0), &mut watch).unwrap();
        }
        pass &= watch.lowest >= -1e-12 && watch.worst <= bound + 1e-12;
        parts.push(format!(
            "{label}: gap in [{:.1e}, {:.2e}] over {} iterates",
            watch.lowest, watch.worst, watch.count
        ));
    }
    verdict(pass, format!("bound lambda rho^2 / 2 = {bound:.2e}; {}", parts.join("; ")))
}

/// CVaR at tail fraction `r` of the group losses by sorting.
fn cvar_sorted(losses: &mut [f64], r: f64) -> f64 {
    losses.sort_by(|a, b| b.total_cmp(a));
    let mass = r * losses.len() as f64;
    let full = mass.floor() as usize;
    let mut total: f64 = losses[..full].iter().sum();
    if full < losses.len() {
        total += (mass - full as f64) * losses[full];
    }
    total / mass
}

fn c9_gdro_cvar() -> Verdict {
    let mut spec = GdroSpec::new(5);
    spec.groups = 2;
    spec.ratio = 0.5;
    spec.label_noise = 3.0;
    let p = make_gdro_cvar(&spec).unwrap();
    let step = 0.02;
    let steps = (6.0 / step) as usize;
    let mut best = (f64::INFINITY, [0.0; 2]);
    for a in 0..=steps {
        for b in 0..=steps {
            let theta = [-3.0 + step * a as f64, -3.0 + step * b as f64];
            let mut losses: Vec<f64> = (0..spec.groups).map(|g| p.group_loss(g, &theta)).collect();
            let v = cvar_sorted(&mut losses, spec.ratio);
            if v < best.0 {
                best = (v, theta);
            }
        }
    }
    let oracle = best.0;

    let sonex = SonexConfig {
        lambda: 0.01,
        beta: 0.1,
        gamma: 0.5,
        gamma_prime: msvr_correction_default(2, 2, 0.5).unwrap(),
        eta: 0.05,
        b1: 2,
        b2: 32,
        iterations: 5000,
        update: UpdateKind::Momentum,
        metric_every: Some(5000),
    };
    let w0 = vec![0.0; p.dim()];
    let run = run_sonex(&p, &w0, &sonex, &SeededRng::new(1, 0), &mut Silent).unwrap();
    let f_sonex = eval_exact(&p, &run.w_final, sonex.lambda).unwrap().f;

    let alexr2 = Alexr2Config {
        lambda: 0.01,
        nu: 0.5,
        eta: 0.01,
        theta: 0.5,
        gamma: 0.1,
        beta: 0.1,
        alpha: 0.5,
        inner: InnerSchedule::Constant { k: 20 },
        iterations: 1000,
        b1: 2,
        b2: 32,
        warm_start_dual: true,
        literal_step12: false,
        update: UpdateKind::Momentum,
        metric_every: Some(1000),
    };
    let run = run_alexr2(&p, &w0, &alexr2, &SeededRng::new(1, 0), &mut Silent).unwrap();
    let f_alexr2 = eval_exact(&p, &run.w_final, alexr2.lambda).unwrap().f;

    let rel = |f: f64| (f - oracle).abs() / oracle.abs();
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/gdro_cvar_sonex.toml");
    let default_ratio = RunConfig::load(&cfg_path).ok().and_then(|c| match c.problem {
        fcco::config::ProblemConfig::GdroCvar(s) => Some(s.ratio),
        _ => None,
    });
    verdict(
        rel(f_sonex) <= 0.05 && rel(f_alexr2) <= 0.05 && default_ratio == Some(0.15),
        format!(
            "grid min {oracle:.5} at theta ({:.2}, {:.2}); sonex F {f_sonex:.5} (rel {:.1e}), alexr2 F {f_alexr2:.5} \
             (rel {:.1e}) (<= 5%); default config ratio {:?}",
            best.1[0],
            best.1[1],
            rel(f_sonex),
            rel(f_alexr2),
            default_ratio
        ),
    )
}

fn c10_determinism() -> Verdict {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::TempDir::new().unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["gdro_cvar_sonex.toml", "gdro_cvar_sgd.toml", "gdro_cvar_alexr2.toml"] {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let mut cfg = RunConfig::load(&dir.join(name)).unwrap();
            cfg.output = tmp.path().join(format!("{name}.{rep}"));
            let outcome = execute(&cfg).unwrap();
            write_outputs(&cfg.output, &outcome).unwrap();
            bytes.push(std::fs::read(cfg.output.join("trace.csv")).unwrap());
        }
        let same = bytes[0] == bytes[1] && !bytes[0].is_empty();
        pass &= same;
        parts.push(format!("{name}: {} bytes {}", bytes[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    verdict(pass, parts.join("; "))
}

fn c11_regularity() -> Verdict {
    let mut rng = SeededRng::new(1111, 0);
    let (mut gram_err, mut svd_err) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let rows = 1 + (rng.uniform() * 6.0) as usize;
        let cols = rows + (rng.uniform() * 5.0) as usize;
        let m: Vec<f64> = (0..rows * cols).map(|_| rng.normal()).collect();
        let a = DMatrix::from_row_slice(rows, cols, &m);
        let reference = (&a * a.transpose()).symmetric_eigenvalues().min();
        let got = gram_min_eigenvalue(&m, rows, cols).value;
        gram_err = gram_err.max((got - reference).abs() / reference.abs().max(1.0));
        let reference = a.singular_values().min();
        let got = singular_value_min(&m, rows, cols).sigma_min;
        svd_err = svd_err.max((got - reference).abs() / reference.max(1.0));
    }
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut cfg = RunConfig::load(&dir.join("circle_alexr2.toml")).unwrap();
    let tmp = tempfile::TempDir::new().unwrap();
    cfg.output = tmp.path().to_path_buf();
    let outcome = execute(&cfg).unwrap();
    write_outputs(&cfg.output, &outcome).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    let gram = json["stationarity"]["gram_min_eig"].as_f64();
    let sigma = json["constrained"]["regularity_sigma_min"].as_f64();
    verdict(
        gram_err <= 1e-10 && svd_err <= 1e-10 && gram.is_some() && sigma.is_some(),
        format!(
            "200 random matrices: gram eig err {gram_err:.1e}, singular value err {svd_err:.1e} (<= 1e-10); \
             circle report gram_min_eig {:.4}, regularity_sigma_min {:.4}",
            gram.unwrap_or(f64::NAN),
            sigma.unwrap_or(f64::NAN)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("prox-oracle equivalence", c1_prox_oracle),
        ("gradient correctness", c2_gradients),
        ("Moreau identities", c3_moreau_identities),
        ("SONEX convergence", c4_sonex_convergence),
        ("MSVR tracking", c5_msvr_tracking),
        ("ALEXR2 inner loop", c6_inner_loop),
        ("constrained toys", c7_constrained_toys),
        ("penalty exactness", c8_penalty_exactness),
        ("GDRO-CVaR consistency", c9_gdro_cvar),
        ("determinism", c10_determinism),
        ("regularity diagnostic", c11_regularity),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name} ({:.1}s): {}", k + 1, start.elapsed().as_secs_f64(), v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
