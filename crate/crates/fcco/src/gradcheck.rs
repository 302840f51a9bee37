//! Finite-difference and grid checks of a problem's oracles.
//!
//! Errors are relative with the denominator floored at 1, so flat regions
//! (hinges at rest, saturated sigmoids) are judged in absolute terms. An
//! oracle error inside a finite difference shows up as an infinite error.

use std::path::Path;

use fcco_core::linalg;
use fcco_core::metrics::{brute_force_prox, eval_exact, finite_difference_gradient, grad_f_lambda_exact};
use fcco_core::rng::sample_data_batch;
use fcco_core::{Error, FccoProblem, OuterFunction, SeededRng};

use crate::{exit, RunConfig};

pub const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-6;
const POINTS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<Check>,
}

impl GradcheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= TOLERANCE
    }

    fn record(&mut self, name: &str, err: f64) {
        let err = if err.is_nan() { f64::INFINITY } else { err };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => c.max_rel_err = c.max_rel_err.max(err),
            None => self.checks.push(Check {
                name: name.to_string(),
                max_rel_err: err,
            }),
        }
    }
}

fn rel_err(got: &[f64], reference: &[f64]) -> f64 {
    linalg::dist(got, reference) / linalg::norm(reference).max(1.0)
}

fn random_vec(rng: &mut SeededRng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.normal()).collect()
}

/// Runs every check at `POINTS` random points around `center`.
pub fn gradcheck(p: &dyn FccoProblem, center: &[f64], lambda: f64, seed: u64) -> Result<GradcheckReport, Error> {
    let (n, d, d1) = (p.num_components(), p.dim(), p.inner_dim());
    let mut rng = SeededRng::new(seed, 0).derive(&[0x6c]);
    let mut report = GradcheckReport::default();
    let mut jac = vec![0.0; d1 * d];
    let mut fd = vec![0.0; d1 * d];
    let mut vjp = vec![0.0; d];
    for _ in 0..POINTS {
        let mut w = center.to_vec();
        linalg::axpy(1.0, &random_vec(&mut rng, d, 0.5), &mut w);
        for i in 0..n {
            p.inner_jacobian_exact(i, &w, &mut jac)?;
            for r in 0..d1 {
                let row = finite_difference_gradient(
                    |x| {
                        let mut out = vec![0.0; d1];
                        p.inner_exact(i, x, &mut out).map_or(f64::NAN, |_| out[r])
                    },
                    &w,
                    STEP,
                );
                fd[r * d..(r + 1) * d].copy_from_slice(&row);
            }
            report.record("inner_jacobian", rel_err(&jac, &fd));

            let batch = sample_data_batch(&mut rng, p.population(i), p.population(i).min(4))?;
            let y = random_vec(&mut rng, d1, 1.0);
            p.inner_vjp(i, &w, &batch, &y, &mut vjp)?;
            let fd_vjp = finite_difference_gradient(
                |x| {
                    let mut g = vec![0.0; d1];
                    p.inner_value(i, x, &batch, &mut g).map_or(f64::NAN, |_| linalg::dot(&y, &g))
                },
                &w,
                STEP,
            );
            report.record("inner_vjp", rel_err(&vjp, &fd_vjp));
        }
        if p.has_additive() {
            let mut grad = vec![0.0; d];
            p.additive_grad_exact(&w, &mut grad)?;
            let fd = finite_difference_gradient(|x| p.additive_value_exact(x).unwrap_or(f64::NAN), &w, STEP);
            report.record("additive_grad", rel_err(&grad, &fd));
        }
        let grad = grad_f_lambda_exact(p, &w, lambda)?;
        let fd = finite_difference_gradient(|x| eval_exact(p, x, lambda).map_or(f64::NAN, |v| v.f_lambda), &w, STEP);
        report.record("grad_F_lambda", rel_err(&grad, &fd));
    }
    if d1 <= 2 {
        let mut outers: Vec<OuterFunction> = Vec::new();
        for i in 0..n {
            let f = p.outer(i);
            if !outers.contains(&f) {
                outers.push(f);
            }
        }
        let mut prox = vec![0.0; d1];
        for f in &outers {
            for _ in 0..5 {
                let t = random_vec(&mut rng, d1, 2.0);
                f.prox(lambda, &t, &mut prox)?;
                let grid = brute_force_prox(f, lambda, &t, 1e-5)?;
                report.record("prox", rel_err(&prox, &grid));
            }
        }
    }
    Ok(report)
}

pub fn print_report(report: &GradcheckReport) {
    println!("check,max_rel_err,status");
    for c in &report.checks {
        let status = if c.max_rel_err <= TOLERANCE { "ok" } else { "FAIL" };
        println!("{},{:.3e},{status}", c.name, c.max_rel_err);
    }
    println!("max relative error: {:.3e}", report.max_rel_err());
}

pub fn exit_code(report: &GradcheckReport) -> i32 {
    if report.passed() {
        exit::OK
    } else {
        exit::ABORT
    }
}

pub fn cmd_gradcheck(path: &Path) -> i32 {
    let setup = RunConfig::load(path).and_then(|cfg| {
        let built = cfg.problem.build()?;
        let w0 = cfg.initial_point(built.fcco().dim())?;
        Ok((cfg, built, w0))
    });
    let (cfg, built, w0) = match setup {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match gradcheck(built.fcco(), &w0, cfg.solver.lambda(), cfg.seed) {
        Ok(report) => {
            print_report(&report);
            exit_code(&report)
        }
        Err(e) => {
            eprintln!("error: oracle check aborted: {e}");
            exit::ABORT
        }
    }
}
