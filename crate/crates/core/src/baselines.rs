//! Norm-wise first-order OFFO baselines: ADAGRAD-Norm and ADAM-Norm.
//!
//! Both use a single scalar accumulator built from `‖g_k‖²` and never
//! evaluate the objective. One iteration costs one gradient, so `w₁ = 1` and
//! `w₂ = 1/(1+n)`.

use nalgebra::DVector;

use crate::problems::ProblemInstance;
use crate::solver::{IterationRecord, RunTrace, Termination, MAX_ITER_CAP};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    AdagradNorm,
    AdamNorm,
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::AdagradNorm => "adagrad_norm",
            Self::AdamNorm => "adam_norm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "adagrad_norm" | "adagrad" => Ok(Self::AdagradNorm),
            "adam_norm" | "adam" => Ok(Self::AdamNorm),
            _ => Err(Error::InvalidArgument(format!("unknown baseline '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub eta: f64,
    /// Initial ADAGRAD accumulator `b₀`.
    pub b0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// `None` selects `⌈10⁵ (1 + n)⌉`, capped at `10⁷`.
    pub max_iter: Option<usize>,
    /// Unused by the deterministic methods; kept so every run carries a seed.
    pub seed: u64,
    pub diagnostics: bool,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self {
            method,
            eta: 1.0,
            b0: 1e-2,
            beta1: 0.9,
            beta2: 0.9999,
            eps: 1e-3,
            max_iter: None,
            seed: 0,
            diagnostics: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eta > 0.0
            && self.b0 >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid baseline configuration {self:?}")))
        }
    }

    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((1e5 * (1.0 + n as f64)).ceil() as usize).min(MAX_ITER_CAP))
    }
}

/// Per-method state and update rule.
trait Update {
    /// Returns the step for gradient `g` at iteration `k`.
    fn step(&mut self, k: usize, g: &DVector<f64>) -> DVector<f64>;
}

struct Adagrad {
    eta: f64,
    b2: f64,
}

impl Update for Adagrad {
    fn step(&mut self, _k: usize, g: &DVector<f64>) -> DVector<f64> {
        self.b2 += g.norm_squared();
        g * (-self.eta / self.b2.sqrt())
    }
}

struct Adam {
    eta: f64,
    beta1: f64,
    beta2: f64,
    m: DVector<f64>,
    v: f64,
}

impl Update for Adam {
    fn step(&mut self, k: usize, g: &DVector<f64>) -> DVector<f64> {
        self.m = &self.m * self.beta1 + g * (1.0 - self.beta1);
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g.norm_squared();
        let t = (k + 1) as i32;
        let m_hat = &self.m / (1.0 - self.beta1.powi(t));
        let v_hat = self.v / (1.0 - self.beta2.powi(t));
        m_hat * (-self.eta / (v_hat + 1e-12).sqrt())
    }
}

fn drive(problem: &ProblemInstance, config: &BaselineConfig, rule: &mut dyn Update) -> Result<RunTrace> {
    config.validate()?;
    let n = problem.dim();
    let d = problem.derivatives();
    let f_start = problem.f_calls();
    let max_iter = config.max_iter_for(n);
    let (w1, w2) = (1.0, 1.0 / (1.0 + n as f64));
    let diag = |x: &DVector<f64>| config.diagnostics.then(|| problem.diagnostic_value(x));

    let mut x = problem.start().clone();
    let mut records = Vec::new();
    let mut k = 0;
    let (hitting_time, termination) = loop {
        let g = d.gradient(&x);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let gnorm = g.norm();
        if gnorm <= config.eps {
            break (Some(k), Termination::Converged);
        }
        if k >= max_iter {
            break (None, Termination::MaxIter);
        }
        let f_diag = diag(&x);
        let s = rule.step(k, &g);
        let cum = (k + 1) as f64;
        records.push(IterationRecord {
            k,
            gnorm,
            snorm: s.norm(),
            f_diag,
            ..IterationRecord::terminal(k, gnorm, f64::NAN, f64::NAN, (cum * w1, cum * w2))
        });
        x += s;
        k += 1;
    };
    let gnorm = d.gradient(&x).norm();
    let mut last = IterationRecord::terminal(k, gnorm, f64::NAN, f64::NAN, (k as f64 * w1, k as f64 * w2));
    last.f_diag = diag(&x);
    records.push(last);
    Ok(RunTrace {
        solver: config.method.name().into(),
        problem: problem.name().into(),
        n,
        ell: n,
        tau: 1.0,
        p: 1,
        seed: config.seed,
        eps: config.eps,
        w1,
        w2,
        records,
        hitting_time,
        termination,
        f_calls: problem.f_calls() - f_start,
    })
}

/// `b_{k+1}² = b_k² + ‖g_k‖²`, `x_{k+1} = x_k − η g_k / b_{k+1}`.
pub fn adagrad_norm_run(problem: &ProblemInstance, config: &BaselineConfig) -> Result<RunTrace> {
    let mut rule = Adagrad {
        eta: config.eta,
        b2: config.b0 * config.b0,
    };
    drive(problem, config, &mut rule)
}

/// Bias-corrected first moment over a scalar second moment of `‖g_k‖²`.
pub fn adam_norm_run(problem: &ProblemInstance, config: &BaselineConfig) -> Result<RunTrace> {
    let mut rule = Adam {
        eta: config.eta,
        beta1: config.beta1,
        beta2: config.beta2,
        m: DVector::zeros(problem.dim()),
        v: 0.0,
    };
    drive(problem, config, &mut rule)
}

pub fn baseline_run(problem: &ProblemInstance, config: &BaselineConfig) -> Result<RunTrace> {
    match config.method {
        BaselineMethod::AdagradNorm => adagrad_norm_run(problem, config),
        BaselineMethod::AdamNorm => adam_norm_run(problem, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_embedded, make_problem, KnownConstants};
    use approx::assert_relative_eq;

    fn at_minimizer() -> ProblemInstance {
        let f = std::sync::Arc::new(crate::problems::functions::Rosenbrock { n: 4 });
        ProblemInstance::new("rosenbr", f, DVector::from_element(4, 1.0), KnownConstants::default()).unwrap()
    }

    #[test]
    fn zero_gradient_start_takes_no_steps() {
        let p = at_minimizer();
        assert_eq!(p.derivatives().gradient(p.start()).norm(), 0.0);
        for m in [BaselineMethod::AdagradNorm, BaselineMethod::AdamNorm] {
            let t = baseline_run(&p, &BaselineConfig::new(m)).unwrap();
            assert_eq!(t.hitting_time, Some(0));
            assert_eq!(t.iterations(), 0);
        }
    }

    #[test]
    fn adagrad_first_step_is_unit_length_with_zero_b0() {
        let p = make_problem("rosenbr", 2).unwrap();
        let c = BaselineConfig {
            b0: 0.0,
            max_iter: Some(1),
            ..BaselineConfig::new(BaselineMethod::AdagradNorm)
        };
        let t = adagrad_norm_run(&p, &c).unwrap();
        assert_relative_eq!(t.records[0].snorm, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn adagrad_steps_never_exceed_eta() {
        let p = make_embedded("rosenbr", 2, 20).unwrap();
        let c = BaselineConfig {
            eta: 0.5,
            max_iter: Some(5000),
            ..BaselineConfig::new(BaselineMethod::AdagradNorm)
        };
        let t = adagrad_norm_run(&p, &c).unwrap();
        assert!(t.steps().all(|r| r.snorm <= 0.5 * (1.0 + 1e-15)));
    }

    #[test]
    fn adam_first_step_is_normalized_gradient() {
        let p = make_problem("rosenbr", 2).unwrap();
        let c = BaselineConfig {
            max_iter: Some(1),
            ..BaselineConfig::new(BaselineMethod::AdamNorm)
        };
        let t = adam_norm_run(&p, &c).unwrap();
        // m̂₀ = g₀ and v̂₀ = ‖g₀‖², so the step is −η g₀/‖g₀‖ up to the 1e-12
        // guard
        assert_relative_eq!(t.records[0].snorm, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn adam_without_momentum_follows_gradient_direction() {
        let p = make_problem("rosenbr", 2).unwrap();
        let c = BaselineConfig {
            beta1: 0.0,
            ..BaselineConfig::new(BaselineMethod::AdamNorm)
        };
        let mut rule = Adam {
            eta: c.eta,
            beta1: 0.0,
            beta2: c.beta2,
            m: DVector::zeros(2),
            v: 0.0,
        };
        let d = p.derivatives();
        let mut x = p.start().clone();
        for k in 0..10 {
            let g = d.gradient(&x);
            let s = rule.step(k, &g);
            let cos = -s.dot(&g) / (s.norm() * g.norm());
            assert_relative_eq!(cos, 1.0, max_relative = 1e-12);
            x += s;
        }
    }

    #[test]
    fn baselines_never_call_the_objective() {
        let p = make_embedded("rosenbr", 2, 30).unwrap();
        for m in [BaselineMethod::AdagradNorm, BaselineMethod::AdamNorm] {
            let c = BaselineConfig {
                max_iter: Some(2000),
                ..BaselineConfig::new(m)
            };
            let t = baseline_run(&p, &c).unwrap();
            assert_eq!(t.f_calls, 0);
        }
        assert_eq!(p.f_calls(), 0);
    }

    #[test]
    fn deterministic_traces_and_unit_costs() {
        let p = make_embedded("rosenbr", 2, 30).unwrap();
        let c = BaselineConfig {
            max_iter: Some(300),
            ..BaselineConfig::new(BaselineMethod::AdamNorm)
        };
        let a = adam_norm_run(&p, &c).unwrap();
        assert_eq!(a.to_csv(), adam_norm_run(&p, &c).unwrap().to_csv());
        for (i, r) in a.steps().enumerate() {
            assert_eq!(r.cum_w1, (i + 1) as f64);
        }
    }

    #[test]
    fn adagrad_accumulator_grows() {
        let mut rule = Adagrad { eta: 1.0, b2: 0.0 };
        let mut prev = 0.0;
        for k in 0..5 {
            rule.step(k, &DVector::from_element(3, k as f64 * 0.1));
            assert!(rule.b2 >= prev);
            prev = rule.b2;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut c = BaselineConfig::new(BaselineMethod::AdamNorm);
        c.beta2 = 1.0;
        assert!(c.validate().is_err());
        assert!(BaselineMethod::parse("adagrad-norm").is_ok());
        assert!(BaselineMethod::parse("sgd").is_err());
    }
}
