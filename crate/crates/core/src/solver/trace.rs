use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

/// Column header of the trace CSV.
pub const TRACE_COLUMNS: [&str; 12] = [
    "k", "gnorm", "snorm", "sigma", "nu", "mu", "mdec", "gs_lhs", "gs_rhs", "f_diag", "cum_w1",
    "cum_w2",
];

/// One row of a run trace. The final row of a run has no step and carries
/// `NaN` in the step fields; see [`IterationRecord::is_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub gnorm: f64,
    pub snorm: f64,
    pub sigma: f64,
    pub nu: f64,
    pub mu: f64,
    /// `m̂(0) − m̂(ŝ_k)`
    pub model_decrease: f64,
    /// `T̂(0) − T̂(ŝ_k)`
    pub taylor_decrease: f64,
    pub gs_lhs: f64,
    pub gs_rhs: f64,
    pub cond_descent: bool,
    pub cond_gradstep: bool,
    pub f_diag: Option<f64>,
    /// Cumulative cost including this iteration's step.
    pub cum_w1: f64,
    pub cum_w2: f64,
    pub redraws: usize,
}

impl IterationRecord {
    pub fn is_step(&self) -> bool {
        self.snorm.is_finite()
    }

    pub(crate) fn terminal(k: usize, gnorm: f64, nu: f64, mu: f64, cum: (f64, f64)) -> Self {
        Self {
            k,
            gnorm,
            snorm: f64::NAN,
            sigma: f64::NAN,
            nu,
            mu,
            model_decrease: f64::NAN,
            taylor_decrease: f64::NAN,
            gs_lhs: f64::NAN,
            gs_rhs: f64::NAN,
            cond_descent: false,
            cond_gradstep: false,
            f_diag: None,
            cum_w1: cum.0,
            cum_w2: cum.1,
            redraws: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub solver: String,
    pub problem: String,
    pub n: usize,
    /// Sketch rows; `n` for full-space methods.
    pub ell: usize,
    pub tau: f64,
    /// Degree in the `μ`/`ν` recurrences; 1 for first-order baselines.
    pub p: usize,
    pub seed: u64,
    pub eps: f64,
    pub w1: f64,
    pub w2: f64,
    pub records: Vec<IterationRecord>,
    /// First `k` with `‖g_k‖ ≤ ε`.
    pub hitting_time: Option<usize>,
    pub termination: Termination,
    /// Objective evaluations made by the run, diagnostics included.
    pub f_calls: u64,
}

impl RunTrace {
    pub fn steps(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.is_step())
    }

    pub fn iterations(&self) -> usize {
        self.steps().count()
    }

    pub fn final_gnorm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.gnorm)
    }

    pub fn has_diagnostics(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.f_diag.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = TRACE_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt_num(r.gnorm),
                fmt_num(r.snorm),
                fmt_num(r.sigma),
                fmt_num(r.nu),
                fmt_num(r.mu),
                fmt_num(r.model_decrease),
                fmt_num(r.gs_lhs),
                fmt_num(r.gs_rhs),
                r.f_diag.map_or(String::new(), fmt_num),
                fmt_num(r.cum_w1),
                fmt_num(r.cum_w2),
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Shortest round-trip representation; non-finite values become empty
/// fields.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

/// Parses a trace CSV back into `(k, gnorm, snorm, ...)` rows of optional
/// numbers, mainly for tests and external tooling.
pub fn parse_trace_csv(text: &str) -> Result<Vec<Vec<Option<f64>>>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Io("empty trace".into()))?;
    if header != TRACE_COLUMNS.join(",") {
        return Err(Error::Io(format!("unexpected trace header '{header}'")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != TRACE_COLUMNS.len() {
                return Err(Error::Io(format!("line {}: {} fields", i + 2, fields.len())));
            }
            fields
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|e| Error::Io(format!("line {}: {e}", i + 2)))
                    }
                })
                .collect()
        })
        .collect()
}
