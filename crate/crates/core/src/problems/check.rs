use nalgebra::DVector;

use super::ProblemInstance;
use crate::{Error, Result};

/// Relative error above which a derivative oracle is flagged.
pub const FD_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub grad_rel_err: f64,
    pub hvp_rel_err: f64,
    pub grad_step: f64,
    pub hess_step: f64,
    pub passed: bool,
}

/// Central-difference step `ε^{1/3} (1 + ‖x‖∞)`.
pub fn default_fd_step(x: &DVector<f64>) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.amax())
}

fn rel_err(approx: &DVector<f64>, exact: &DVector<f64>) -> f64 {
    (approx - exact).norm() / exact.norm().max(approx.norm()).max(1.0)
}

/// Compares the gradient and Hessian-vector oracles against finite
/// differences of the objective value (through the counted diagnostic path).
///
/// The gradient uses central differences with step `h`. The Hessian-vector
/// product along a fixed direction `v` uses the four-point mixed difference
/// `[f(x+he_i+hv) − f(x+he_i−hv) − f(x−he_i+hv) + f(x−he_i−hv)] / 4h²`,
/// whose step is at least `ε^{1/4} (1 + ‖x‖∞)` to keep rounding below the
/// tolerance.
pub fn check_derivatives(
    problem: &ProblemInstance,
    x: &DVector<f64>,
    h: f64,
) -> Result<DerivativeReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let n = problem.dim();
    let d = problem.derivatives();
    let g = d.gradient(x);
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("gradient oracle"));
    }
    let v = DVector::from_fn(n, |i, _| ((i + 1) as f64 * 0.7).sin() + 0.3).normalize();
    let hv = d.hess_vec(x, &v);
    if !hv.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("Hessian-vector oracle"));
    }

    let f = |y: &DVector<f64>| problem.diagnostic_value(y);
    let mut fd_g = DVector::zeros(n);
    let mut y = x.clone();
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        fd_g[i] = (fp - fm) / (2.0 * h);
    }

    let h2 = h.max(f64::EPSILON.powf(0.25) * (1.0 + x.amax()));
    let mut fd_hv = DVector::zeros(n);
    for i in 0..n {
        let eval = |si: f64, sv: f64| {
            let mut z = x + &v * (sv * h2);
            z[i] += si * h2;
            f(&z)
        };
        fd_hv[i] = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
            / (4.0 * h2 * h2);
    }
    if !fd_g.iter().chain(fd_hv.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("objective oracle"));
    }

    let grad_rel_err = rel_err(&fd_g, &g);
    let hvp_rel_err = rel_err(&fd_hv, &hv);
    Ok(DerivativeReport {
        grad_rel_err,
        hvp_rel_err,
        grad_step: h,
        hess_step: h2,
        passed: grad_rel_err <= FD_TOLERANCE && hvp_rel_err <= FD_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::functions::{LeastSquares, TestFunction};
    use crate::problems::{make_problem, KnownConstants};
    use std::sync::Arc;

    /// Wraps a function and shifts its gradient by a constant.
    struct Faulty<F>(F, f64);

    impl<F: TestFunction> TestFunction for Faulty<F> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            self.0.value(x)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            self.0.gradient(x).add_scalar(self.1)
        }
        fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
            self.0.hess_vec(x, v)
        }
        fn least_squares(&self) -> Option<&dyn LeastSquares> {
            None
        }
    }

    #[test]
    fn quadratic_hessian_error_is_at_rounding_level() {
        let p = make_problem("tridia", 10).unwrap();
        let x = p.start().clone();
        for h in [1e-3, 1e-4] {
            let r = check_derivatives(&p, &x, h).unwrap();
            assert!(r.passed);
            assert!(r.hvp_rel_err < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn rosenbrock_start_passes() {
        let p = make_problem("rosenbr", 2).unwrap();
        let x = p.start().clone();
        let r = check_derivatives(&p, &x, default_fd_step(&x)).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(p.f_calls() > 0);
    }

    #[test]
    fn perturbed_gradient_is_flagged() {
        let p = ProblemInstance::new(
            "faulty",
            Arc::new(Faulty(
                crate::problems::functions::Rosenbrock { n: 2 },
                1e-3,
            )),
            DVector::from_vec(vec![0.2, 0.3]),
            KnownConstants::default(),
        )
        .unwrap();
        let x = p.start().clone();
        let r = check_derivatives(&p, &x, default_fd_step(&x)).unwrap();
        assert!(!r.passed);
        assert!(r.grad_rel_err > FD_TOLERANCE);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let p = make_problem("rosenbr", 2).unwrap();
        assert!(check_derivatives(&p, &p.start().clone(), 0.0).is_err());
    }
}
