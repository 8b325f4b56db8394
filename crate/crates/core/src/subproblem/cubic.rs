use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const SECULAR_MAX_ITER: usize = 500;

/// Global minimizer of `gᵀu + ½ uᵀHu + (σ/6) ‖u‖³`.
///
/// Uses an eigendecomposition of `H` and a bracketed Newton iteration on the
/// secular equation `‖u(λ)‖ = 2λ/σ`, `(H + λI) u(λ) = −g`,
/// `λ ≥ max(0, −λ_min)`. When `g` has no component on the eigenspace of
/// `λ_min` and the secular equation has no root to the right of `−λ_min`
/// (the hard case), a multiple of a minimal eigenvector is added to reach
/// the required length.
pub fn cubic_reg_exact(g: &DVector<f64>, h: &DMatrix<f64>, sigma: f64) -> Result<DVector<f64>> {
    let m = g.len();
    if m == 0 {
        return Err(Error::InvalidArgument("empty subproblem".into()));
    }
    if h.nrows() != m || h.ncols() != m {
        return Err(Error::InvalidArgument(format!(
            "H is {}x{}, expected {m}x{m}",
            h.nrows(),
            h.ncols()
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !g.iter().chain(h.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("cubic subproblem data"));
    }

    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let lambdas = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let gamma = q.tr_mul(g);
    let gnorm = g.norm();
    let lmin = lambdas.min();
    let lscale = lambdas.amax().max(f64::MIN_POSITIVE);

    if gnorm == 0.0 && lmin >= 0.0 {
        return Ok(DVector::zeros(m));
    }

    let lambda_lo = (-lmin).max(0.0);
    let u_of = |lambda: f64, coeffs: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(m, |i, _| {
            let d = lambdas[i] + lambda;
            if coeffs[i] == 0.0 {
                0.0
            } else {
                -coeffs[i] / d
            }
        })
    };

    if lmin < 0.0 {
        let in_min_space: Vec<bool> = lambdas
            .iter()
            .map(|&l| l <= lmin + 1e-12 * lscale)
            .collect();
        let orthogonal = gamma
            .iter()
            .zip(&in_min_space)
            .all(|(&c, &inside)| !inside || c.abs() <= 1e-12 * gnorm);
        if orthogonal {
            let partial = DVector::from_fn(m, |i, _| if in_min_space[i] { 0.0 } else { gamma[i] });
            let coords = u_of(lambda_lo, &partial);
            let target = 2.0 * lambda_lo / sigma;
            let pn = coords.norm();
            if pn <= target {
                let t = (target * target - pn * pn).sqrt();
                let j0 = in_min_space.iter().position(|&b| b).expect("nonempty");
                let mut coords = coords;
                coords[j0] = t;
                let u = q * coords;
                return check_stationarity(g, &sym, sigma, u);
            }
        }
    }

    // φ(λ) = ‖u(λ)‖ − 2λ/σ is convex and decreasing on (λ_lo, ∞).
    let phi = |lambda: f64| -> (f64, f64, f64) {
        let mut norm2 = 0.0;
        let mut dnorm2 = 0.0;
        for i in 0..m {
            let d = lambdas[i] + lambda;
            let c = gamma[i] * gamma[i];
            if c != 0.0 {
                norm2 += c / (d * d);
                dnorm2 += -2.0 * c / (d * d * d);
            }
        }
        let norm = norm2.sqrt();
        let val = norm - 2.0 * lambda / sigma;
        let deriv = if norm > 0.0 { dnorm2 / (2.0 * norm) } else { 0.0 } - 2.0 / sigma;
        (val, deriv, norm)
    };

    let mut lo = lambda_lo;
    let mut hi = lambda_lo + 1.0;
    let mut iters = 0;
    while phi(hi).0 > 0.0 {
        lo = hi;
        hi = lambda_lo + 2.0 * (hi - lambda_lo);
        iters += 1;
        if iters > 2000 || !hi.is_finite() {
            return Err(Error::NonConvergence {
                what: "secular bracket",
                iterations: iters,
            });
        }
    }

    // Start from the right end: Newton on a convex decreasing function moves
    // left monotonically once inside the bracket.
    let mut lambda = hi;
    let mut converged = false;
    for _ in 0..SECULAR_MAX_ITER {
        let (val, deriv, norm) = phi(lambda);
        if val == 0.0 || val.abs() <= 4.0 * f64::EPSILON * norm.max(2.0 * lambda / sigma) {
            converged = true;
            break;
        }
        if val > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            lambda = if phi(hi).0.abs() < phi(lo).0.abs() || lo == lambda_lo {
                hi
            } else {
                lo
            };
            converged = true;
            break;
        }
        let newton = lambda - val / deriv;
        lambda = if deriv < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "secular equation",
            iterations: SECULAR_MAX_ITER,
        });
    }
    let u = q * u_of(lambda, &gamma);
    check_stationarity(g, &sym, sigma, u)
}

fn check_stationarity(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    sigma: f64,
    u: DVector<f64>,
) -> Result<DVector<f64>> {
    let r = g + h * &u + &u * (0.5 * sigma * u.norm());
    let scale = 1.0 + g.norm() + (h * &u).norm();
    if r.norm() <= 1e-9 * scale {
        Ok(u)
    } else {
        Err(Error::NonConvergence {
            what: "cubic subproblem stationarity",
            iterations: SECULAR_MAX_ITER,
        })
    }
}

/// `gᵀu + ½ uᵀHu + (σ/6) ‖u‖³`
pub fn cubic_model_value(g: &DVector<f64>, h: &DMatrix<f64>, sigma: f64, u: &DVector<f64>) -> f64 {
    g.dot(u) + 0.5 * u.dot(&(h * u)) + sigma / 6.0 * u.norm().powi(3)
}
