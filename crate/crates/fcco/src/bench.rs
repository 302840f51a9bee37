use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::run::{execute, write_outputs};
use crate::{exit, CliError, RunConfig};

pub const TABLE_HEADER: &str =
    "config,problem,solver,status,exit_code,iterations,inner_oracle_calls,component_draws,F,F_lambda,grad_norm,max_violation";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchRow {
    pub config: String,
    pub problem: String,
    pub solver: String,
    pub status: String,
    pub exit_code: i32,
    pub iterations: Option<usize>,
    pub inner_oracle_calls: Option<u64>,
    pub component_draws: Option<u64>,
    pub f: Option<f64>,
    pub f_lambda: Option<f64>,
    pub grad_norm: Option<f64>,
    pub max_violation: Option<f64>,
}

/// `*.toml` files directly inside `dir`, sorted by name.
pub fn config_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

fn bench_one(path: &Path) -> BenchRow {
    let mut row = BenchRow {
        config: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        ..BenchRow::default()
    };
    let fail = |mut row: BenchRow, e: CliError| {
        row.status = "error".into();
        row.exit_code = e.exit_code();
        eprintln!("{}: {e}", row.config);
        row
    };
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail(row, e),
    };
    row.problem = cfg.problem.name().into();
    row.solver = cfg.solver.name().into();
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(row, e),
    };
    if let Err(e) = write_outputs(&cfg.output, &outcome) {
        return fail(row, e);
    }
    row.status = outcome.report.status.into();
    row.exit_code = outcome.exit_code;
    if let Some(last) = outcome.trace.last() {
        row.iterations = Some(last.iteration);
        row.inner_oracle_calls = Some(last.inner_oracle_calls);
        row.component_draws = Some(last.component_draws);
        row.f = last.f_value;
        row.f_lambda = last.f_lambda;
        row.grad_norm = last.grad_norm;
        row.max_violation = last.max_violation;
    }
    row
}

pub fn run_bench(dir: &Path) -> io::Result<Vec<BenchRow>> {
    Ok(config_files(dir)?.iter().map(|p| bench_one(p)).collect())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn write_table(out: &mut impl Write, rows: &[BenchRow]) -> io::Result<()> {
    writeln!(out, "{TABLE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.config,
            r.problem,
            r.solver,
            r.status,
            r.exit_code,
            opt(r.iterations),
            opt(r.inner_oracle_calls),
            opt(r.component_draws),
            opt_f(r.f),
            opt_f(r.f_lambda),
            opt_f(r.grad_norm),
            opt_f(r.max_violation),
        )?;
    }
    Ok(())
}

/// Runs every config in `dir` and prints the table. The exit code is the
/// largest per-run code, so 0 means every run succeeded.
pub fn cmd_bench(dir: &Path) -> i32 {
    let rows = match run_bench(dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return exit::IO;
        }
    };
    let stdout = io::stdout();
    if let Err(e) = write_table(&mut stdout.lock(), &rows) {
        eprintln!("error: {e}");
        return exit::IO;
    }
    rows.iter().map(|r| r.exit_code).max().unwrap_or(exit::OK)
}
