use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use fcco_core::alexr2::run_alexr2;
use fcco_core::sonex::run_sonex;
use fcco_core::{Error, Failure, Monitor, SeededRng, SolverTrace};

use crate::config::{BuiltProblem, RunConfig, SolverConfig};
use crate::report::{self, Report};
use crate::{core_exit_code, exit, trace_csv, CliError};

struct WallClock {
    start: Option<Instant>,
}

impl Monitor for WallClock {
    fn elapsed_ms(&mut self) -> Option<f64> {
        self.start.map(|s| s.elapsed().as_secs_f64() * 1e3)
    }
}

pub struct RunOutcome {
    pub trace: SolverTrace,
    pub report: Report,
    pub exit_code: i32,
}

struct Solved {
    trace: SolverTrace,
    w_final: Vec<f64>,
    w_output: Vec<f64>,
    tau: usize,
}

fn solve(cfg: &RunConfig, built: &BuiltProblem, w0: &[f64], monitor: &mut dyn Monitor) -> Result<Solved, Failure> {
    let p = built.fcco();
    let rng = SeededRng::new(cfg.seed, 0);
    match &cfg.solver {
        SolverConfig::Alexr2(c) => run_alexr2(p, w0, c, &rng, monitor).map(|r| Solved {
            trace: r.trace,
            w_final: r.w_final,
            w_output: r.w_output,
            tau: r.tau,
        }),
        other => {
            let c = other.sonex().expect("sonex-family solver");
            run_sonex(p, w0, &c, &rng, monitor).map(|r| Solved {
                trace: r.trace,
                w_final: r.w_final,
                w_output: r.w_output,
                tau: r.tau,
            })
        }
    }
}

fn status(e: &Error) -> &'static str {
    match e {
        Error::NonFinite { .. } => "non_finite",
        Error::Oracle(_) => "oracle_error",
        _ => "rejected",
    }
}

/// Runs a parsed config. `Err` means nothing ran: the config, problem or
/// solver settings were rejected, and no files should be written.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let built = cfg.problem.build()?;
    let p = built.fcco();
    let w0 = cfg.initial_point(p.dim())?;
    let mut clock = WallClock {
        start: cfg.record_wall_time.then(Instant::now),
    };
    let mut report = Report {
        status: "ok",
        error: None,
        problem: cfg.problem.name(),
        solver: cfg.solver.name(),
        seed: cfg.seed,
        iterations: cfg.solver.iterations(),
        rows: 0,
        last_row: None,
        tau: None,
        w_final: None,
        w_output: None,
        stationarity: None,
        constrained: None,
    };
    let solved = match solve(cfg, &built, &w0, &mut clock) {
        Ok(s) => s,
        Err(f) => {
            let code = core_exit_code(&f.error);
            if code == exit::CONFIG {
                return Err(CliError::Core(f.error));
            }
            report.status = status(&f.error);
            report.error = Some(f.error.to_string());
            report.rows = f.partial.len();
            report.last_row = report::last_row(&f.partial);
            return Ok(RunOutcome {
                trace: f.partial,
                report,
                exit_code: code,
            });
        }
    };
    report.rows = solved.trace.len();
    report.last_row = report::last_row(&solved.trace);
    report.tau = Some(solved.tau);
    let lambda = cfg.solver.lambda();
    let diagnostics = report::stationarity(p, &solved.w_output, lambda).and_then(|s| {
        let c = match built.constrained() {
            Some((cp, rho, lam)) => Some(report::constrained(p, cp, &solved.w_output, rho, lam)?),
            None => None,
        };
        Ok((s, c))
    });
    let mut exit_code = exit::OK;
    match diagnostics {
        Ok((s, c)) => {
            report.stationarity = s;
            report.constrained = c;
        }
        Err(e) => {
            report.status = "oracle_error";
            report.error = Some(format!("diagnostics: {e}"));
            exit_code = exit::ORACLE;
        }
    }
    report.w_final = Some(solved.w_final);
    report.w_output = Some(solved.w_output);
    Ok(RunOutcome {
        trace: solved.trace,
        report,
        exit_code,
    })
}

pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("trace.csv"))?);
    trace_csv::write_trace(&mut csv, &outcome.trace)?;
    csv.flush()?;
    let json = serde_json::to_string_pretty(&outcome.report).map_err(std::io::Error::other)?;
    fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}

/// Loads, runs and writes `trace.csv` and `report.json` under the config's
/// output directory. Returns the process exit code.
pub fn cmd_run(path: &Path) -> i32 {
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(&cfg).and_then(|o| write_outputs(&cfg.output, &o).map(|_| o)) {
        Ok(o) => {
            if let Some(err) = &o.report.error {
                eprintln!("error: {err}");
            }
            let row = o.report.last_row.as_ref();
            println!(
                "{} on {}: {} rows, status {}, grad_norm {}, wrote {}",
                o.report.solver,
                o.report.problem,
                o.report.rows,
                o.report.status,
                row.and_then(|r| r.grad_norm).map_or("-".into(), |g| format!("{g:.3e}")),
                cfg.output.display()
            );
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
