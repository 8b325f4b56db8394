//! Test problems, their derivative oracles, and the orthonormal DCT
//! embedding that manufactures large problems with low-rank Hessians.
//!
//! A [`ProblemInstance`] keeps the objective value behind a counted
//! diagnostic path. Solvers receive a [`DerivativeView`], which offers only
//! gradients, Hessian-vector products and (for least-squares problems)
//! Jacobian products.

mod check;
mod embed;
pub mod functions;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use check::{check_derivatives, default_fd_step, DerivativeReport, FD_TOLERANCE};
pub use embed::{dct_columns, EmbeddedProblem};
pub use functions::{LeastSquares, TestFunction};

use crate::{Error, Result};
use functions::*;

/// Names accepted by [`make_problem`].
pub const REGISTRY: &[&str] = &[
    "rosenbr",
    "arwhead",
    "broyden3d",
    "tridia",
    "eg2",
    "dixmaana",
    "helix",
    "kowosb",
    "arglina",
];

/// Constants that are known analytically for some problems. None of them is
/// used by the solvers; they feed the runtime invariant checks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KnownConstants {
    /// Lipschitz constant of the gradient.
    pub lipschitz_gradient: Option<f64>,
    /// Lipschitz constant of the Hessian.
    pub lipschitz_hessian: Option<f64>,
    pub f_low: Option<f64>,
    pub grad_bound: Option<f64>,
}

impl KnownConstants {
    /// `L_p` for model degree `p`.
    pub fn lipschitz(&self, p: usize) -> Option<f64> {
        match p {
            1 => self.lipschitz_gradient,
            2 => self.lipschitz_hessian,
            _ => None,
        }
    }
}

pub struct ProblemInstance {
    name: String,
    function: Arc<dyn TestFunction>,
    embedding: Option<Arc<EmbeddedProblem>>,
    x0: DVector<f64>,
    constants: KnownConstants,
    f_calls: AtomicU64,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("n", &self.dim())
            .field("embedded", &self.embedding.is_some())
            .field("constants", &self.constants)
            .finish()
    }
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        function: Arc<dyn TestFunction>,
        x0: DVector<f64>,
        constants: KnownConstants,
    ) -> Result<Self> {
        if x0.len() != function.dim() {
            return Err(Error::InvalidArgument(format!(
                "start point has length {} but the function has dimension {}",
                x0.len(),
                function.dim()
            )));
        }
        Ok(Self {
            name: name.into(),
            function,
            embedding: None,
            x0,
            constants,
            f_calls: AtomicU64::new(0),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn constants(&self) -> &KnownConstants {
        &self.constants
    }

    /// The embedding, when this instance was produced by [`embed`].
    pub fn embedding(&self) -> Option<&EmbeddedProblem> {
        self.embedding.as_deref()
    }

    /// The derivative-only view handed to solvers.
    pub fn derivatives(&self) -> DerivativeView<'_> {
        DerivativeView { problem: self }
    }

    /// Objective value, for diagnostics and plotting only. Every call is
    /// counted.
    pub fn diagnostic_value(&self, x: &DVector<f64>) -> f64 {
        self.f_calls.fetch_add(1, Ordering::Relaxed);
        self.function.value(x)
    }

    pub fn f_calls(&self) -> u64 {
        self.f_calls.load(Ordering::Relaxed)
    }

    pub fn reset_f_calls(&self) {
        self.f_calls.store(0, Ordering::Relaxed);
    }

    /// Dense Hessian from `n` Hessian-vector products. Meant for checks on
    /// small instances, never for the solver path.
    pub fn dense_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            h.set_column(j, &self.function.hess_vec(x, &e));
            e[j] = 0.0;
        }
        (&h + h.transpose()) * 0.5
    }
}

/// Gradient, Hessian-vector and Jacobian products of a problem. There is
/// deliberately no way to reach the objective value from here.
#[derive(Clone, Copy)]
pub struct DerivativeView<'a> {
    problem: &'a ProblemInstance,
}

impl<'a> DerivativeView<'a> {
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn name(&self) -> &'a str {
        &self.problem.name
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.problem.function.gradient(x)
    }

    pub fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.problem.function.hess_vec(x, v)
    }

    pub fn least_squares(&self) -> Option<&'a dyn LeastSquares> {
        self.problem.function.least_squares()
    }
}

/// Default `n̂` for each registry entry.
pub fn default_dim(name: &str) -> Result<usize> {
    Ok(match name {
        "rosenbr" => 2,
        "arwhead" | "broyden3d" | "tridia" | "eg2" | "arglina" => 10,
        "dixmaana" => 12,
        "helix" => 3,
        "kowosb" => 4,
        _ => return Err(Error::UnknownProblem(name.to_string())),
    })
}

fn invalid(name: &str, dim: usize, reason: &str) -> Error {
    Error::InvalidDimension {
        problem: name.to_string(),
        dim,
        reason: reason.to_string(),
    }
}

/// Builds a registry problem of dimension `n_hat` with its standard start.
pub fn make_problem(name: &str, n_hat: usize) -> Result<ProblemInstance> {
    let zero_floor = KnownConstants {
        f_low: Some(0.0),
        ..Default::default()
    };
    let (function, x0, constants): (Arc<dyn TestFunction>, DVector<f64>, KnownConstants) =
        match name {
            "rosenbr" => {
                if n_hat < 2 {
                    return Err(invalid(name, n_hat, "needs at least 2 variables"));
                }
                let f = Rosenbrock { n: n_hat };
                let x0 = f.start();
                (Arc::new(f), x0, zero_floor)
            }
            "arwhead" => {
                if n_hat < 2 {
                    return Err(invalid(name, n_hat, "needs at least 2 variables"));
                }
                (
                    Arc::new(Arwhead { n: n_hat }),
                    DVector::from_element(n_hat, 1.0),
                    zero_floor,
                )
            }
            "broyden3d" => {
                if n_hat < 1 {
                    return Err(invalid(name, n_hat, "needs at least 1 variable"));
                }
                (
                    Arc::new(Broyden3d { n: n_hat }),
                    DVector::from_element(n_hat, -1.0),
                    zero_floor,
                )
            }
            "tridia" => {
                if n_hat < 1 {
                    return Err(invalid(name, n_hat, "needs at least 1 variable"));
                }
                let f = Tridia { n: n_hat };
                let l1 = quadratic_lipschitz(&f);
                (
                    Arc::new(f),
                    DVector::from_element(n_hat, 1.0),
                    KnownConstants {
                        lipschitz_gradient: Some(l1),
                        lipschitz_hessian: Some(0.0),
                        f_low: Some(0.0),
                        grad_bound: None,
                    },
                )
            }
            "eg2" => {
                if n_hat < 2 {
                    return Err(invalid(name, n_hat, "needs at least 2 variables"));
                }
                (
                    Arc::new(Eg2 { n: n_hat }),
                    DVector::zeros(n_hat),
                    KnownConstants {
                        f_low: Some(-(n_hat as f64 - 1.0) - 0.5),
                        ..Default::default()
                    },
                )
            }
            "dixmaana" => {
                if n_hat == 0 || n_hat % 3 != 0 {
                    return Err(invalid(name, n_hat, "must be a positive multiple of 3"));
                }
                (
                    Arc::new(Dixmaana { n: n_hat }),
                    DVector::from_element(n_hat, 2.0),
                    KnownConstants::default(),
                )
            }
            "helix" => {
                if n_hat != 3 {
                    return Err(invalid(name, n_hat, "fixed at 3 variables"));
                }
                (
                    Arc::new(Helix),
                    DVector::from_vec(vec![-1.0, 0.0, 0.0]),
                    zero_floor,
                )
            }
            "kowosb" => {
                if n_hat != 4 {
                    return Err(invalid(name, n_hat, "fixed at 4 variables"));
                }
                (Arc::new(Kowosb), Kowosb::start(), zero_floor)
            }
            "arglina" => {
                if n_hat < 1 {
                    return Err(invalid(name, n_hat, "needs at least 1 variable"));
                }
                let f = Arglina {
                    n: n_hat,
                    m: 2 * n_hat,
                };
                let l1 = quadratic_lipschitz(&f);
                (
                    Arc::new(f),
                    DVector::from_element(n_hat, 1.0),
                    KnownConstants {
                        lipschitz_gradient: Some(l1),
                        lipschitz_hessian: Some(0.0),
                        f_low: Some(0.0),
                        grad_bound: None,
                    },
                )
            }
            _ => return Err(Error::UnknownProblem(name.to_string())),
        };
    ProblemInstance::new(name, function, x0, constants)
}

/// Spectral norm of the constant Hessian of a quadratic.
fn quadratic_lipschitz(f: &dyn TestFunction) -> f64 {
    let n = f.dim();
    let x = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    let mut e = DVector::zeros(n);
    for j in 0..n {
        e[j] = 1.0;
        h.set_column(j, &f.hess_vec(&x, &e));
        e[j] = 0.0;
    }
    let h = (&h + h.transpose()) * 0.5;
    h.symmetric_eigenvalues().abs().max()
}

/// Embeds `base` into `ℝⁿ` through the first `n̂` DCT-II columns. The start
/// point is the embedded standard start `A x̂₀`. Known constants carry over
/// unchanged because `A` has orthonormal columns.
pub fn embed(base: &ProblemInstance, n: usize) -> Result<ProblemInstance> {
    let n_hat = base.dim();
    if n < n_hat {
        return Err(invalid(
            base.name(),
            n,
            &format!("embedding dimension must be at least {n_hat}"),
        ));
    }
    let embedded = Arc::new(EmbeddedProblem::new(
        base.function.clone(),
        dct_columns(n, n_hat),
    ));
    let x0 = embedded.lift(&base.x0);
    let mut instance = ProblemInstance::new(
        base.name.clone(),
        embedded.clone() as Arc<dyn TestFunction>,
        x0,
        base.constants,
    )?;
    instance.embedding = Some(embedded);
    Ok(instance)
}

/// Registry problem of size `n_hat` embedded into `ℝⁿ`; `n == n_hat` skips
/// the embedding.
pub fn make_embedded(name: &str, n_hat: usize, n: usize) -> Result<ProblemInstance> {
    let base = make_problem(name, n_hat)?;
    if n == n_hat {
        Ok(base)
    } else {
        embed(&base, n)
    }
}
