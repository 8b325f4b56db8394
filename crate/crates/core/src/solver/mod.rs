//! The sketched OFFO adaptive regularisation loop.
//!
//! Every iteration draws a sketch `S_k`, minimizes the sketched regularised
//! model, and accepts the step unconditionally. The regularisation weight
//! comes from two recurrences that only use derivatives: `ν_k` grows with the
//! step lengths, and `μ_k` tracks observed gradient-prediction errors.

mod checks;
mod config;
mod trace;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checks::*;
pub use config::*;
pub use trace::*;

use crate::problems::{DerivativeView, ProblemInstance};
use crate::sketch::{operator_norm, SketchOperator};
use crate::subproblem::{solve_2b, solve_p1, solve_p2, SketchedModel, SubproblemSolution};
use crate::{Error, Result};

/// `μ_k = max(μ_{k−1}, (‖S_{k−1}g_k‖ − ‖∇T̂_{k−1}‖) / (κ_{S,k−1} ‖s_{k−1}‖^p))`
pub fn update_mu(
    mu_prev: f64,
    sprev_g_norm: f64,
    prev_grad_model_norm: f64,
    kappa_prev: f64,
    prev_step_norm: f64,
    p: usize,
) -> Result<f64> {
    if !(prev_step_norm > 0.0) {
        return Err(Error::Stagnation(0));
    }
    if !(kappa_prev > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa_prev}")));
    }
    let candidate =
        (sprev_g_norm - prev_grad_model_norm) / (kappa_prev * prev_step_norm.powi(p as i32));
    Ok(mu_prev.max(candidate))
}

/// `σ_0 = ν_0`; afterwards `ν_k` (theory) or `max(ϑν_k, ξ_k μ_k)`.
pub fn select_sigma(k: usize, nu: f64, mu: f64, xi: f64, vartheta: f64, rule: SigmaRule) -> f64 {
    if k == 0 {
        return nu;
    }
    match rule {
        SigmaRule::Theory => nu,
        SigmaRule::Practical => (vartheta * nu).max(xi * mu),
    }
}

/// `ν_{k+1} = ν_k + ν_k ‖s_k‖^{p+1}`
pub fn update_nu(nu: f64, step_norm: f64, p: usize) -> f64 {
    nu + nu * step_norm.powi(p as i32 + 1)
}

/// Artifacts of the previous iteration needed by the `μ` update.
#[derive(Debug, Clone)]
pub struct PreviousStep {
    pub sketch: SketchOperator,
    pub grad_model_norm: f64,
    pub step_norm: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub k: usize,
    pub nu: f64,
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
    pub prev: Option<PreviousStep>,
    prev_gnorm: f64,
}

/// What an observer sees at each accepted step.
pub struct StepView<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    pub model: &'a SketchedModel,
    pub solution: &'a SubproblemSolution,
    pub theta: f64,
}

/// `B(x)` as an operator, for the 2B variant.
pub fn build_bk<'a>(
    view: DerivativeView<'a>,
    x: &'a DVector<f64>,
    mode: &'a BMode,
) -> Result<Box<dyn Fn(&DVector<f64>) -> DVector<f64> + 'a>> {
    match mode {
        BMode::Zero => {
            let n = view.dim();
            Ok(Box::new(move |_v: &DVector<f64>| DVector::zeros(n)))
        }
        BMode::GaussNewton => {
            let ls = view.least_squares().ok_or_else(|| {
                Error::NotLeastSquares(view.name().to_string())
            })?;
            Ok(Box::new(move |v: &DVector<f64>| ls.jac_t_vec(x, &ls.jac_vec(x, v)) * 2.0))
        }
        BMode::User(op) => Ok(Box::new(move |v: &DVector<f64>| op(x, v))),
    }
}

/// A single SKOFFAR run in progress.
pub struct Skoffar<'a> {
    problem: &'a ProblemInstance,
    config: SolverConfig,
    rng: ChaCha8Rng,
    state: SolverState,
    g: DVector<f64>,
    n: usize,
    ell: usize,
    theta: f64,
    weights: (f64, f64),
    cum: (f64, f64),
    f_calls_start: u64,
}

impl<'a> Skoffar<'a> {
    pub fn new(problem: &'a ProblemInstance, config: SolverConfig) -> Result<Self> {
        let n = problem.dim();
        config.validate(n)?;
        let x = problem.start().clone();
        let g = problem.derivatives().gradient(&x);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let state = SolverState {
            x,
            k: 0,
            nu: config.nu0,
            mu: config.mu_init,
            sigma: config.nu0,
            xi: config.xi_rule.initial(),
            prev: None,
            prev_gnorm: f64::NAN,
        };
        Ok(Self {
            problem,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            ell: config.rows(n),
            theta: config.theta_for(n),
            weights: config.cost_weights(n),
            cum: (0.0, 0.0),
            f_calls_start: problem.f_calls(),
            state,
            g,
            n,
            config,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn gradient(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn diagnostic(&self) -> Option<f64> {
        self.config
            .diagnostics
            .then(|| self.problem.diagnostic_value(&self.state.x))
    }

    fn draw_sketch(&mut self) -> Result<SketchOperator> {
        match self.config.sketch {
            SketchKind::Identity => Ok(SketchOperator::identity(self.n)),
            SketchKind::Gaussian => SketchOperator::sample(self.ell, self.n, &mut self.rng),
        }
    }

    fn solve(&self, sketch: SketchOperator, sigma: f64) -> Result<(SketchedModel, SubproblemSolution)> {
        let view = self.problem.derivatives();
        let x = &self.state.x;
        let model = match self.config.variant {
            Variant::Skoffar2B => {
                let b = build_bk(view, x, &self.config.b_mode)?;
                SketchedModel::quadratic_reg(sketch, &self.g, b, sigma)?
            }
            Variant::SkoffarP if self.config.p == 1 => SketchedModel::first_order(sketch, &self.g, sigma)?,
            Variant::SkoffarP => SketchedModel::cubic(sketch, &self.g, |v| view.hess_vec(x, v), sigma)?,
        };
        let sol = match model.reg {
            crate::subproblem::Regulariser::Quadratic => solve_2b(&model, self.theta)?,
            _ if model.degree == 1 => solve_p1(&model, self.theta)?,
            _ => solve_p2(&model, self.theta, self.config.solve_mode)?,
        };
        Ok((model, sol))
    }

    /// Performs iteration `k`: `μ` update, `σ` choice, sketch draw,
    /// subproblem solve, unconditional acceptance and `ν` update.
    pub fn step(&mut self, observer: &mut dyn FnMut(&StepView)) -> Result<IterationRecord> {
        let k = self.state.k;
        let q = self.config.recurrence_degree();
        let gnorm = self.g.norm();

        if let Some(prev) = &self.state.prev {
            let sg = prev.sketch.apply(&self.g).norm();
            self.state.mu = update_mu(
                self.state.mu,
                sg,
                prev.grad_model_norm,
                prev.kappa,
                prev.step_norm,
                q,
            )
            .map_err(|_| Error::Stagnation(k))?;
            if let XiRule::Doubling { .. } = self.config.xi_rule {
                self.state.xi = if gnorm < self.state.prev_gnorm {
                    (2.0 * self.state.xi).min(1.0)
                } else {
                    (0.5 * self.state.xi).max(1e-6)
                };
            }
        }
        let sigma = select_sigma(
            k,
            self.state.nu,
            self.state.mu,
            self.state.xi,
            self.config.vartheta,
            self.config.sigma_rule,
        );
        self.state.sigma = sigma;
        let f_diag = self.diagnostic();
        if self.config.fault == Fault::QueryObjective {
            self.problem.diagnostic_value(&self.state.x);
        }

        let mut last_err = None;
        let mut accepted = None;
        for attempt in 0..=self.config.max_redraws {
            let sketch = self.draw_sketch()?;
            match self.solve(sketch, sigma) {
                Ok((model, sol)) if sol.cond_descent && sol.cond_gradstep => {
                    accepted = Some((model, sol, attempt));
                    break;
                }
                Ok((_, sol)) => {
                    last_err = Some(format!(
                        "termination conditions failed (descent {}, gradstep {} <= {})",
                        sol.cond_descent, sol.gradstep_lhs, sol.gradstep_rhs
                    ))
                }
                Err(Error::DegenerateSketch(msg)) => last_err = Some(msg),
                Err(e) => return Err(e),
            }
            if self.config.sketch == SketchKind::Identity {
                break;
            }
        }
        let Some((mut model, sol, redraws)) = accepted else {
            return Err(Error::RunAborted {
                iteration: k,
                reason: last_err.unwrap_or_default(),
            });
        };
        observer(&StepView {
            k,
            x: &self.state.x,
            model: &model,
            solution: &sol,
            theta: self.theta,
        });

        let s = sol.s.clone().expect("model built from a sketch");
        let snorm = s.norm();
        let sketch = model.sketch.take().expect("model built from a sketch");
        let kappa = match self.config.kappa_mode {
            KappaMode::BetaBound => self.config.kappa_bound_for(self.n),
            KappaMode::ExactNorm => operator_norm(&sketch)?,
        };
        self.cum.0 += self.weights.0;
        self.cum.1 += self.weights.1;
        let record = IterationRecord {
            k,
            gnorm,
            snorm,
            sigma,
            nu: self.state.nu,
            mu: self.state.mu,
            model_decrease: sol.model_decrease,
            taylor_decrease: sol.taylor_decrease,
            gs_lhs: sol.gradstep_lhs,
            gs_rhs: sol.gradstep_rhs,
            cond_descent: sol.cond_descent,
            cond_gradstep: sol.cond_gradstep,
            f_diag,
            cum_w1: self.cum.0,
            cum_w2: self.cum.1,
            redraws,
        };

        self.state.x += &s;
        if self.config.fault != Fault::FreezeNu {
            self.state.nu = update_nu(self.state.nu, snorm, q);
        }
        self.state.prev = Some(PreviousStep {
            sketch,
            grad_model_norm: sol.grad_model_norm,
            step_norm: snorm,
            kappa,
        });
        self.state.prev_gnorm = gnorm;
        self.state.k += 1;
        self.g = self.problem.derivatives().gradient(&self.state.x);
        if !self.g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(record)
    }

    /// Iterates until `‖g_k‖ ≤ ε` or the iteration budget is spent.
    pub fn run(mut self, observer: &mut dyn FnMut(&StepView)) -> Result<RunTrace> {
        let max_iter = self.config.max_iter_for(self.n);
        let mut records = Vec::new();
        let (hitting_time, termination) = loop {
            if self.g.norm() <= self.config.eps {
                break (Some(self.state.k), Termination::Converged);
            }
            if self.state.k >= max_iter {
                break (None, Termination::MaxIter);
            }
            records.push(self.step(observer)?);
        };
        let mut last = IterationRecord::terminal(
            self.state.k,
            self.g.norm(),
            self.state.nu,
            self.state.mu,
            self.cum,
        );
        last.f_diag = self.diagnostic();
        records.push(last);
        Ok(RunTrace {
            solver: self.config.name().into(),
            problem: self.problem.name().into(),
            n: self.n,
            ell: self.ell,
            tau: self.config.effective_tau(self.n),
            p: self.config.recurrence_degree(),
            seed: self.config.seed,
            eps: self.config.eps,
            w1: self.weights.0,
            w2: self.weights.1,
            records,
            hitting_time,
            termination,
            f_calls: self.problem.f_calls() - self.f_calls_start,
        })
    }
}

pub fn run(problem: &ProblemInstance, config: &SolverConfig) -> Result<RunTrace> {
    Skoffar::new(problem, config.clone())?.run(&mut |_| {})
}

pub fn run_observed(
    problem: &ProblemInstance,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&StepView),
) -> Result<RunTrace> {
    Skoffar::new(problem, config.clone())?.run(observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_embedded, make_problem};
    use approx::assert_relative_eq;

    #[test]
    fn mu_update_examples() {
        assert_eq!(update_mu(3.0, 1.0, 2.0, 2.0, 1.0, 2).unwrap(), 3.0);
        assert_eq!(update_mu(1.0, 4.0, 0.0, 2.0, 1.0, 2).unwrap(), 2.0);
        assert!(update_mu(1.0, 4.0, 0.0, 2.0, 0.0, 2).is_err());
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(select_sigma(0, 3.0, 100.0, 0.05, 1e-3, SigmaRule::Practical), 3.0);
        assert_eq!(select_sigma(4, 1000.0, 10.0, 0.05, 1e-3, SigmaRule::Practical), 1.0);
        assert_eq!(select_sigma(4, 2.0, 5.0, 1.0, 1e-3, SigmaRule::Practical), 5.0);
        assert_eq!(select_sigma(4, 2.0, 5.0, 1.0, 1e-3, SigmaRule::Theory), 2.0);
    }

    #[test]
    fn nu_examples() {
        assert_eq!(update_nu(1.0, 1.0, 2), 2.0);
        assert_eq!(update_nu(1.7, 0.0, 2), 1.7);
        assert_eq!(update_nu(2.0, 2.0, 1), 10.0);
    }

    #[test]
    fn converged_start_takes_no_steps() {
        let p = make_problem("rosenbr", 2).unwrap();
        let c = SolverConfig {
            eps: 1e6,
            ..SolverConfig::default()
        };
        let t = run(&p, &c).unwrap();
        assert_eq!(t.hitting_time, Some(0));
        assert_eq!(t.iterations(), 0);
        assert_eq!(t.records.len(), 1);
    }

    #[test]
    fn identity_sketch_solves_convex_quadratic_quickly() {
        let p = make_problem("tridia", 10).unwrap();
        let c = SolverConfig {
            sketch: SketchKind::Identity,
            nu0: 1e-6,
            ..SolverConfig::default()
        };
        let t = run(&p, &c).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert!(t.hitting_time.unwrap() <= 3, "{:?}", t.hitting_time);
    }

    #[test]
    fn embedded_rosenbrock_run_is_certified() {
        let p = make_embedded("rosenbr", 2, 200).unwrap();
        let c = SolverConfig::skoffar(2, 0.1, 7);
        let t = run(&p, &c).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        let steps: Vec<_> = t.steps().collect();
        assert!(!steps.is_empty());
        for w in t.records.windows(2) {
            assert!(w[1].nu > w[0].nu);
            assert!(w[1].mu >= w[0].mu);
        }
        assert!(steps.iter().all(|r| r.cond_descent && r.cond_gradstep));
        assert_eq!(t.f_calls, 0);
        assert_eq!(p.f_calls(), 0);
    }

    #[test]
    fn runs_are_deterministic() {
        let p = make_embedded("rosenbr", 2, 50).unwrap();
        let c = SolverConfig::skoffar(2, 0.2, 3);
        assert_eq!(run(&p, &c).unwrap().to_csv(), run(&p, &c).unwrap().to_csv());
        let other = SolverConfig::skoffar(2, 0.2, 4);
        assert_ne!(run(&p, &c).unwrap().to_csv(), run(&p, &other).unwrap().to_csv());
    }

    #[test]
    fn first_order_full_space_matches_hand_recurrence() {
        // S = I and p = 1: s = −g/σ, so the loop reduces to scalar
        // recurrences that are easy to restate.
        let p = make_problem("tridia", 6).unwrap();
        let c = SolverConfig {
            sketch: SketchKind::Identity,
            eps: 1e-4,
            ..SolverConfig::skoffar(1, 1.0, 0)
        };
        let t = run(&p, &c).unwrap();
        assert_eq!(t.termination, Termination::Converged);

        let d = p.derivatives();
        let kappa = 2.5;
        let mut x = p.start().clone();
        let (mut nu, mut mu) = (100.0f64, 1e3f64);
        let mut prev: Option<(f64, f64)> = None; // (‖g_{k−1}‖, ‖s_{k−1}‖)
        let mut k = 0;
        loop {
            let g = d.gradient(&x);
            if g.norm() <= 1e-4 {
                break;
            }
            if let Some((gm, sn)) = prev {
                mu = mu.max((g.norm() - gm) / (kappa * sn));
            }
            let sigma = if k == 0 { nu } else { (1e-3 * nu).max(0.05 * mu) };
            let s = &g * (-1.0 / sigma);
            let r = &t.records[k];
            assert_relative_eq!(r.sigma, sigma, max_relative = 1e-12);
            assert_relative_eq!(r.snorm, s.norm(), max_relative = 1e-10);
            prev = Some((g.norm(), s.norm()));
            nu += nu * s.norm_squared();
            x += s;
            k += 1;
        }
        assert_eq!(t.hitting_time, Some(k));
    }

    #[test]
    fn frozen_nu_fault_is_visible() {
        let p = make_embedded("rosenbr", 2, 20).unwrap();
        let c = SolverConfig {
            fault: Fault::FreezeNu,
            max_iter: Some(5),
            ..SolverConfig::skoffar(2, 0.5, 1)
        };
        let t = run(&p, &c).unwrap();
        assert!(t.records.windows(2).all(|w| w[1].nu == w[0].nu));
    }

    #[test]
    fn gauss_newton_needs_residuals() {
        let p = make_embedded("arwhead", 10, 20).unwrap();
        let c = SolverConfig::skoffar_2b(0.5, 0);
        assert!(matches!(run(&p, &c), Err(Error::NotLeastSquares(_))));
    }

    #[test]
    fn gauss_newton_matches_hessian_on_linear_least_squares() {
        let p = make_problem("arglina", 10).unwrap();
        let d = p.derivatives();
        let x = p.start().clone();
        let mode = BMode::GaussNewton;
        let b = build_bk(d, &x, &mode).unwrap();
        for i in 0..10 {
            let v = DVector::from_fn(10, |j, _| ((i * 10 + j) as f64 * 0.37).sin());
            assert!((b(&v) - d.hess_vec(&x, &v)).norm() < 1e-12);
        }
    }

    #[test]
    fn diagnostics_count_objective_calls() {
        let p = make_embedded("rosenbr", 2, 20).unwrap();
        let c = SolverConfig {
            diagnostics: true,
            ..SolverConfig::skoffar(2, 0.5, 1)
        };
        let t = run(&p, &c).unwrap();
        assert!(t.has_diagnostics());
        assert_eq!(t.f_calls as usize, t.records.len());
    }
}
