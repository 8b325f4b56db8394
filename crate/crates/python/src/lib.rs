//! Python bindings: problems, SKOFFAR runs, the first-order baselines and
//! the acceptance checks.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use sketchreg_core::baselines::{baseline_run, BaselineConfig, BaselineMethod};
use sketchreg_core::harness::{self, Acceptance, AcceptanceOptions};
use sketchreg_core::problems::{self, ProblemInstance};
use sketchreg_core::solver::{self, default_nu0, RunTrace, SolverConfig, Termination, Variant, XiRule};
use sketchreg_core::subproblem::cubic_reg_exact;
use sketchreg_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config { .. } | Error::NotLeastSquares(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn check_len(v: &[f64], n: usize, what: &str) -> PyResult<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!("{what} has length {}, expected {n}", v.len())))
    }
}

/// Test problem, optionally embedded in a larger ambient space.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: ProblemInstance,
}

#[pymethods]
impl PyProblem {
    /// `Problem(name, n_hat=None, n=None)`; `n` larger than `n_hat` embeds
    /// the problem in `n` dimensions.
    #[new]
    #[pyo3(signature = (name, n_hat=None, n=None))]
    fn new(name: &str, n_hat: Option<usize>, n: Option<usize>) -> PyResult<Self> {
        let n_hat = match n_hat {
            Some(h) => h,
            None => problems::default_dim(name).map_err(py_err)?,
        };
        let inner = match n {
            Some(n) if n != n_hat => problems::make_embedded(name, n_hat, n),
            _ => problems::make_problem(name, n_hat),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn least_squares(&self) -> bool {
        self.inner.derivatives().least_squares().is_some()
    }

    /// Objective evaluations made so far (diagnostics only).
    #[getter]
    fn f_calls(&self) -> u64 {
        self.inner.f_calls()
    }

    fn start(&self) -> Vec<f64> {
        self.inner.start().as_slice().to_vec()
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(&x, self.inner.dim(), "x")?;
        Ok(self.inner.derivatives().gradient(&DVector::from_vec(x)).as_slice().to_vec())
    }

    fn hess_vec(&self, x: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(&x, self.inner.dim(), "x")?;
        check_len(&v, self.inner.dim(), "v")?;
        let hv = self.inner.derivatives().hess_vec(&DVector::from_vec(x), &DVector::from_vec(v));
        Ok(hv.as_slice().to_vec())
    }

    /// Objective value; counted in `f_calls`.
    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len(&x, self.inner.dim(), "x")?;
        Ok(self.inner.diagnostic_value(&DVector::from_vec(x)))
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, n={})", self.inner.name(), self.inner.dim())
    }
}

/// Per-iteration record of a run.
#[pyclass(name = "Trace", frozen)]
struct PyTrace {
    inner: RunTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn solver(&self) -> String {
        self.inner.solver.clone()
    }

    #[getter]
    fn problem(&self) -> String {
        self.inner.problem.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn ell(&self) -> usize {
        self.inner.ell
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.termination == Termination::Converged
    }

    /// First `k` with `‖∇f(x_k)‖ ≤ ε`, if reached.
    #[getter]
    fn hitting_time(&self) -> Option<usize> {
        self.inner.hitting_time
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn f_calls(&self) -> u64 {
        self.inner.f_calls
    }

    #[getter]
    fn weights(&self) -> (f64, f64) {
        (self.inner.w1, self.inner.w2)
    }

    #[getter]
    fn final_gnorm(&self) -> f64 {
        self.inner.final_gnorm()
    }

    /// One trace column as a list; `f` entries are `None` unless the run
    /// recorded diagnostics.
    fn column(&self, name: &str) -> PyResult<Vec<Option<f64>>> {
        let pick: fn(&solver::IterationRecord) -> Option<f64> = match name {
            "k" => |r| Some(r.k as f64),
            "gnorm" => |r| Some(r.gnorm),
            "snorm" => |r| Some(r.snorm),
            "sigma" => |r| Some(r.sigma),
            "nu" => |r| Some(r.nu),
            "mu" => |r| Some(r.mu),
            "model_decrease" => |r| Some(r.model_decrease),
            "gs_lhs" => |r| Some(r.gs_lhs),
            "gs_rhs" => |r| Some(r.gs_rhs),
            "f" => |r| r.f_diag,
            "cum_w1" => |r| Some(r.cum_w1),
            "cum_w2" => |r| Some(r.cum_w2),
            _ => return Err(PyValueError::new_err(format!("unknown column '{name}'"))),
        };
        Ok(self.inner.records.iter().map(pick).collect())
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// `(cost, f)` pairs for plotting; needs `diagnostics=True`.
    fn plot_data(&self) -> PyResult<Vec<(f64, f64)>> {
        harness::emit_trace_plot_data(&self.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace({} on {}, tau={}, iterations={}, converged={})",
            self.inner.solver,
            self.inner.problem,
            self.inner.tau,
            self.inner.iterations(),
            self.converged()
        )
    }
}

/// Runs SKOFFAR with degree `p` (or the Gauss-Newton variant with
/// `variant="skoffar_2b"`).
#[pyfunction]
#[pyo3(signature = (problem, *, p=2, tau=1.0, variant="skoffar_p", seed=0, eps=1e-3, max_iter=None,
    nu0=None, mu_init=None, xi=None, vartheta=None, theta=None, diagnostics=false))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    problem: &PyProblem,
    p: usize,
    tau: f64,
    variant: &str,
    seed: u64,
    eps: f64,
    max_iter: Option<usize>,
    nu0: Option<f64>,
    mu_init: Option<f64>,
    xi: Option<f64>,
    vartheta: Option<f64>,
    theta: Option<f64>,
    diagnostics: bool,
) -> PyResult<PyTrace> {
    let mut config = match Variant::parse(variant).map_err(py_err)? {
        Variant::SkoffarP => SolverConfig::skoffar(p, tau, seed),
        Variant::Skoffar2B => SolverConfig::skoffar_2b(tau, seed),
    };
    config.eps = eps;
    config.max_iter = max_iter;
    config.nu0 = nu0.unwrap_or(default_nu0(config.recurrence_degree()));
    config.theta = theta;
    config.diagnostics = diagnostics;
    if let Some(m) = mu_init {
        config.mu_init = m;
    }
    if let Some(x) = xi {
        config.xi_rule = XiRule::Constant(x);
    }
    if let Some(v) = vartheta {
        config.vartheta = v;
    }
    let inner = py.detach(|| solver::run(&problem.inner, &config)).map_err(py_err)?;
    Ok(PyTrace { inner })
}

/// Runs ADAGRAD-Norm (`method="adagrad"`) or ADAM-Norm (`method="adam"`).
#[pyfunction]
#[pyo3(signature = (problem, method, *, eta=1.0, b0=1e-2, beta1=0.9, beta2=0.9999, eps=1e-3,
    max_iter=None, diagnostics=false))]
#[allow(clippy::too_many_arguments)]
fn baseline(
    py: Python<'_>,
    problem: &PyProblem,
    method: &str,
    eta: f64,
    b0: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    max_iter: Option<usize>,
    diagnostics: bool,
) -> PyResult<PyTrace> {
    let config = BaselineConfig {
        eta,
        b0,
        beta1,
        beta2,
        eps,
        max_iter,
        diagnostics,
        ..BaselineConfig::new(BaselineMethod::parse(method).map_err(py_err)?)
    };
    let inner = py.detach(|| baseline_run(&problem.inner, &config)).map_err(py_err)?;
    Ok(PyTrace { inner })
}

/// Cost weights `(w1, w2)` of one sketched iteration.
#[pyfunction]
fn cost_weights(tau: f64, n: usize) -> (f64, f64) {
    (harness::w1(tau, n), harness::w2(tau, n))
}

/// Global minimizer of `gᵀu + ½ uᵀHu + (σ/6)‖u‖³`.
#[pyfunction]
fn cubic_minimizer(g: Vec<f64>, h: Vec<Vec<f64>>, sigma: f64) -> PyResult<Vec<f64>> {
    let d = g.len();
    if h.len() != d || h.iter().any(|row| row.len() != d) {
        return Err(PyValueError::new_err(format!("H must be {d}x{d}")));
    }
    let hm = DMatrix::from_fn(d, d, |i, j| h[i][j]);
    let u = cubic_reg_exact(&DVector::from_vec(g), &hm, sigma).map_err(py_err)?;
    Ok(u.as_slice().to_vec())
}

/// Runs acceptance criteria (all of them unless `only` is given) and returns
/// `(id, name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (only=None, seeds=10))]
fn check(py: Python<'_>, only: Option<Vec<u8>>, seeds: u64) -> PyResult<Vec<(u8, String, bool, String)>> {
    if let Some(bad) = only.iter().flatten().find(|&&id| !(1..=15).contains(&id)) {
        return Err(PyValueError::new_err(format!("no criterion {bad}")));
    }
    let results = py.detach(|| {
        let acc = Acceptance::new(AcceptanceOptions {
            seeds,
            ..AcceptanceOptions::default()
        });
        match only {
            Some(ids) => ids.into_iter().map(|id| acc.criterion(id)).collect(),
            None => acc.run_all().results,
        }
    });
    Ok(results
        .into_iter()
        .map(|r| (r.id, r.name.to_string(), r.passed, r.detail))
        .collect())
}

#[pyfunction]
fn problem_names() -> Vec<&'static str> {
    problems::REGISTRY.to_vec()
}

#[pymodule]
fn sketchreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(cost_weights, m)?)?;
    m.add_function(wrap_pyfunction!(cubic_minimizer, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(problem_names, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_weights_match_harness() {
        let (w1, w2) = cost_weights(0.1, 100);
        assert!((w1 - 1.1).abs() < 1e-12);
        assert!((w2 - 1.1 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_minimizer_rejects_ragged_hessian() {
        assert!(cubic_minimizer(vec![1.0, 0.0], vec![vec![1.0], vec![0.0, 1.0]], 1.0).is_err());
    }

    #[test]
    fn unknown_problem_is_an_error() {
        assert!(PyProblem::new("no-such-problem", Some(2), None).is_err());
    }
}
