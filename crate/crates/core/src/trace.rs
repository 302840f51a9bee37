use alloc::vec::Vec;

/// One recorded solver iteration. Metric fields are `None` when they were not
/// evaluated at this row (or cannot be, e.g. no exact oracle).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub inner_oracle_calls: u64,
    pub component_draws: u64,
    pub f_value: Option<f64>,
    pub f_lambda: Option<f64>,
    pub grad_norm: Option<f64>,
    pub stat_t_residual: Option<f64>,
    pub stat_grad_residual: Option<f64>,
    pub max_violation: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    rows: Vec<TraceRow>,
}

impl SolverTrace {
    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(
                row.inner_oracle_calls >= last.inner_oracle_calls,
                "oracle call counter went backwards"
            );
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Hooks a driver can attach to a run. The core has no clock, so wall time is
/// whatever the monitor reports.
pub trait Monitor {
    fn elapsed_ms(&mut self) -> Option<f64> {
        None
    }

    fn on_row(&mut self, _row: &TraceRow) {}

    /// Called with every iterate `w_t`, `t >= 1`, right after the update.
    fn on_iterate(&mut self, _iteration: usize, _w: &[f64]) {}
}

/// A monitor that does nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl Monitor for Silent {}

/// Oracle accounting shared by the solvers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub inner_oracle_calls: u64,
    pub component_draws: u64,
}

/// Default metric cadence: `max(1, T / 200)`.
pub fn default_metric_every(iterations: usize) -> usize {
    (iterations / 200).max(1)
}

/// Row bookkeeping shared by the solvers: the initial row, every
/// `metric_every`-th iteration and the final row carry exact metrics.
pub(crate) struct Recorder<'m> {
    pub trace: SolverTrace,
    every: usize,
    lambda: f64,
    monitor: &'m mut dyn Monitor,
}

impl<'m> Recorder<'m> {
    pub fn new(every: usize, lambda: f64, monitor: &'m mut dyn Monitor) -> Self {
        Recorder {
            trace: SolverTrace::default(),
            every: every.max(1),
            lambda,
            monitor,
        }
    }

    pub fn due(&self, iteration: usize, last: usize) -> bool {
        iteration == 0 || iteration == last || iteration % self.every == 0
    }

    pub fn record(
        &mut self,
        problem: &dyn crate::problem::FccoProblem,
        w: &[f64],
        iteration: usize,
        counters: Counters,
    ) -> crate::error::Result<()> {
        let snap = crate::metrics::snapshot(problem, w, self.lambda)?;
        let row = TraceRow {
            iteration,
            inner_oracle_calls: counters.inner_oracle_calls,
            component_draws: counters.component_draws,
            f_value: snap.map(|s| s.f),
            f_lambda: snap.map(|s| s.f_lambda),
            grad_norm: snap.map(|s| s.grad_norm),
            stat_t_residual: snap.map(|s| s.stat_t_residual),
            stat_grad_residual: snap.map(|s| s.stat_grad_residual),
            max_violation: snap.and_then(|s| s.max_violation).or_else(|| problem.max_violation_exact(w)),
            wall_ms: self.monitor.elapsed_ms(),
        };
        self.monitor.on_row(&row);
        self.trace.push(row);
        Ok(())
    }

    pub fn iterate(&mut self, iteration: usize, w: &[f64]) {
        self.monitor.on_iterate(iteration, w);
    }

    pub fn fail(self, error: crate::error::Error) -> crate::error::Failure {
        crate::error::Failure {
            error,
            partial: self.trace,
        }
    }
}
