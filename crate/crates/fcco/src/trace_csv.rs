use std::io::{self, Write};

use fcco_core::{SolverTrace, TraceRow};

pub const HEADER: &str =
    "iteration,inner_oracle_calls,component_draws,F,F_lambda,grad_norm,stat_t_residual,stat_grad_residual,max_violation,wall_ms";

/// 17 significant digits, enough to round-trip an `f64`. Missing values are empty.
fn field(out: &mut impl Write, v: Option<f64>) -> io::Result<()> {
    match v {
        Some(x) => write!(out, ",{x:.16e}"),
        None => write!(out, ","),
    }
}

pub fn write_row(out: &mut impl Write, row: &TraceRow) -> io::Result<()> {
    write!(out, "{},{},{}", row.iteration, row.inner_oracle_calls, row.component_draws)?;
    for v in [
        row.f_value,
        row.f_lambda,
        row.grad_norm,
        row.stat_t_residual,
        row.stat_grad_residual,
        row.max_violation,
        row.wall_ms,
    ] {
        field(out, v)?;
    }
    writeln!(out)
}

pub fn write_trace(out: &mut impl Write, trace: &SolverTrace) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for row in trace.rows() {
        write_row(out, row)?;
    }
    Ok(())
}
