//! Multi-seed sweeps over (problem, solver, τ, seed) cells.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ProblemSpec, SolverSpec};
use crate::baselines::baseline_run;
use crate::solver::{fmt_num, run_observed, RunTrace, StepView};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub problem: ProblemSpec,
    /// Index into [`ExperimentConfig::solvers`].
    pub solver: usize,
    pub solver_name: &'static str,
    /// 1 for full-space baselines.
    pub tau: f64,
    pub seed: u64,
}

impl Cell {
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_{}_tau{}_seed{}",
            self.problem.name, self.problem.n, self.solver_name, self.tau, self.seed
        )
    }
}

/// One executed cell.
#[derive(Debug)]
pub struct CellRun {
    pub cell: Cell,
    pub trace: Result<RunTrace>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub problem: String,
    pub n_hat: usize,
    pub n: usize,
    pub solver: String,
    pub tau: f64,
    pub runs: usize,
    pub converged: usize,
    /// Runs that returned an error.
    pub failed: usize,
    pub success_fraction: f64,
    /// Mean `N₁(ε)` over converged runs.
    pub mean_n1: Option<f64>,
    /// Mean of `N₁(ε) · w₁` over converged runs.
    pub mean_w1_cost: Option<f64>,
    pub mean_w2_cost: Option<f64>,
    /// Weighted budgets `max_iter · w`, reported when some run did not
    /// converge.
    pub budget_w1: f64,
    pub budget_w2: f64,
    pub runtime_s: f64,
}

impl ResultRow {
    pub fn all_converged(&self) -> bool {
        self.converged == self.runs
    }

    fn cost_field(&self, mean: Option<f64>, budget: f64) -> String {
        match mean {
            Some(v) if self.all_converged() => fmt_num(v),
            _ => format!(">{}", fmt_num(budget)),
        }
    }
}

pub const RESULT_COLUMNS: &str =
    "problem,n_hat,n,solver,tau,runs,converged,failed,success_fraction,mean_n1,mean_w1_cost,mean_w2_cost";

pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub runs: Vec<CellRun>,
}

impl ExperimentResult {
    /// Results table. Runtimes are left out so the file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RESULT_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.problem,
                r.n_hat,
                r.n,
                r.solver,
                r.tau,
                r.runs,
                r.converged,
                r.failed,
                r.success_fraction,
                r.mean_n1.map_or(String::new(), fmt_num),
                r.cost_field(r.mean_w1_cost, r.budget_w1),
                r.cost_field(r.mean_w2_cost, r.budget_w2),
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("problem,n,solver,tau,seed,seconds,error\n");
        for r in &self.runs {
            let err = r.trace.as_ref().err().map(|e| e.to_string().replace([',', '\n'], ";"));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.3},{}",
                r.cell.problem.name,
                r.cell.problem.n,
                r.cell.solver_name,
                r.cell.tau,
                r.cell.seed,
                r.seconds,
                err.unwrap_or_default()
            );
        }
        out
    }

    pub fn row(&self, problem: &str, solver: &str, tau: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.problem == problem && r.solver == solver && r.tau == tau)
    }

    pub fn traces(&self) -> impl Iterator<Item = &RunTrace> {
        self.runs.iter().filter_map(|r| r.trace.as_ref().ok())
    }
}

/// Cells in canonical order: config order of problems and solvers, `τ` as
/// listed, then seed.
pub fn expand_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for problem in &config.problems {
        for (si, solver) in config.solvers.iter().enumerate() {
            let taus: &[f64] = if solver.is_sketched() { &config.taus } else { &[1.0] };
            for &tau in taus {
                for &seed in &config.seeds {
                    cells.push(Cell {
                        problem: problem.clone(),
                        solver: si,
                        solver_name: solver.name(),
                        tau,
                        seed,
                    });
                }
            }
        }
    }
    cells
}

/// Hook given each accepted SKOFFAR step of a cell.
pub type StepHook<'h> = &'h (dyn Fn(&Cell, &StepView) + Sync);

pub fn run_cell(config: &ExperimentConfig, cell: &Cell, hook: Option<StepHook>) -> Result<RunTrace> {
    let problem = cell.problem.instantiate()?;
    match &config.solvers[cell.solver] {
        SolverSpec::Skoffar(template) => {
            let mut c = template.clone();
            c.tau = cell.tau;
            c.seed = cell.seed;
            c.eps = config.eps;
            match hook {
                Some(h) => run_observed(&problem, &c, &mut |v| h(cell, v)),
                None => run_observed(&problem, &c, &mut |_| {}),
            }
        }
        SolverSpec::Baseline(template) => {
            let mut c = template.clone();
            c.seed = cell.seed;
            c.eps = config.eps;
            baseline_run(&problem, &c)
        }
    }
}

/// Runs every cell, concurrently up to `config.workers`. Individual run
/// errors are recorded in their cell and never abort the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(config, None)
}

pub fn run_experiment_with(config: &ExperimentConfig, hook: Option<StepHook>) -> Result<ExperimentResult> {
    config.validate()?;
    let cells = expand_cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let runs: Vec<CellRun> = pool.install(|| {
        cells
            .into_par_iter()
            .map(|cell| {
                let start = Instant::now();
                let trace = run_cell(config, &cell, hook);
                CellRun {
                    seconds: start.elapsed().as_secs_f64(),
                    cell,
                    trace,
                }
            })
            .collect()
    });
    let rows = summarize(config, &runs);
    Ok(ExperimentResult { rows, runs })
}

fn summarize(config: &ExperimentConfig, runs: &[CellRun]) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = Vec::new();
    for group in runs.chunk_by(|a, b| {
        a.cell.problem == b.cell.problem && a.cell.solver == b.cell.solver && a.cell.tau == b.cell.tau
    }) {
        let first = &group[0].cell;
        let converged: Vec<&RunTrace> = group
            .iter()
            .filter_map(|r| r.trace.as_ref().ok())
            .filter(|t| t.hitting_time.is_some())
            .collect();
        let failed = group.iter().filter(|r| r.trace.is_err()).count();
        let mean = |f: &dyn Fn(&RunTrace) -> f64| {
            (!converged.is_empty()).then(|| converged.iter().map(|t| f(t)).sum::<f64>() / converged.len() as f64)
        };
        let n1 = |t: &RunTrace| t.hitting_time.unwrap_or(0) as f64;
        let (w1, w2, max_iter) = weights_for(config, first);
        rows.push(ResultRow {
            problem: first.problem.name.clone(),
            n_hat: first.problem.n_hat,
            n: first.problem.n,
            solver: first.solver_name.to_string(),
            tau: first.tau,
            runs: group.len(),
            converged: converged.len(),
            failed,
            success_fraction: converged.len() as f64 / group.len() as f64,
            mean_n1: mean(&n1),
            mean_w1_cost: mean(&|t| n1(t) * t.w1),
            mean_w2_cost: mean(&|t| n1(t) * t.w2),
            budget_w1: max_iter as f64 * w1,
            budget_w2: max_iter as f64 * w2,
            runtime_s: group.iter().map(|r| r.seconds).sum(),
        });
    }
    rows
}

fn weights_for(config: &ExperimentConfig, cell: &Cell) -> (f64, f64, usize) {
    let n = cell.problem.n;
    match &config.solvers[cell.solver] {
        SolverSpec::Skoffar(c) => {
            let mut c = c.clone();
            c.tau = cell.tau;
            let (w1, w2) = c.cost_weights(n);
            (w1, w2, c.max_iter_for(n))
        }
        SolverSpec::Baseline(c) => (1.0, 1.0 / (1.0 + n as f64), c.max_iter_for(n)),
    }
}

/// Writes the results CSV to `path`, runtimes to `<path>.timings.csv`, and
/// per-run traces to `config.trace_dir` when set.
pub fn write_outputs(config: &ExperimentConfig, result: &ExperimentResult, path: &Path) -> Result<()> {
    std::fs::write(path, result.to_csv())?;
    std::fs::write(timings_path(path), result.timings_csv())?;
    if let Some(dir) = &config.trace_dir {
        std::fs::create_dir_all(dir)?;
        for r in &result.runs {
            if let Ok(t) = &r.trace {
                t.write_csv(&dir.join(format!("{}.csv", r.cell.file_stem())))?;
            }
        }
    }
    Ok(())
}

pub fn timings_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".timings.csv");
    PathBuf::from(s)
}

/// `(cumulative w₁ cost, f(x_k))` for every iterate of a trace recorded with
/// diagnostics. The cost of `x_k` is `k · w₁`.
pub fn emit_trace_plot_data(trace: &RunTrace) -> Result<Vec<(f64, f64)>> {
    if !trace.has_diagnostics() {
        return Err(Error::DiagnosticsMissing);
    }
    Ok(trace
        .records
        .iter()
        .map(|r| (r.k as f64 * trace.w1, r.f_diag.expect("checked above")))
        .collect())
}

pub fn plot_data_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("cost_w1,f\n");
    for (c, f) in series {
        let _ = writeln!(out, "{},{}", fmt_num(*c), fmt_num(*f));
    }
    out
}
