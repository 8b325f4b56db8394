//! Independent reference computations used to cross-check the solver. None
//! of this shares code with the solver or subproblem modules.

/// State of the reference loop after each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceIterate {
    pub x: [f64; 2],
    pub sigma: f64,
    pub nu: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ReferenceParams {
    pub nu0: f64,
    pub mu_init: f64,
    pub xi: f64,
    pub vartheta: f64,
    pub kappa: f64,
}

fn rosen_grad(x: [f64; 2]) -> [f64; 2] {
    let t = x[1] - x[0] * x[0];
    [-400.0 * x[0] * t - 2.0 * (1.0 - x[0]), 200.0 * t]
}

fn rosen_hess(x: [f64; 2]) -> [[f64; 2]; 2] {
    [
        [1200.0 * x[0] * x[0] - 400.0 * x[1] + 2.0, -400.0 * x[0]],
        [-400.0 * x[0], 200.0],
    ]
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// `−(H + λI)⁻¹ g` by the adjugate formula.
fn shifted_solve(h: [[f64; 2]; 2], g: [f64; 2], lambda: f64) -> [f64; 2] {
    let a = h[0][0] + lambda;
    let d = h[1][1] + lambda;
    let b = h[0][1];
    let det = a * d - b * b;
    [-(d * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det]
}

/// Minimizer of `gᵀs + ½ sᵀHs + (σ/6)‖s‖³` in two variables by bisection on
/// `‖s(λ)‖ = 2λ/σ`. Returns `None` in the hard case.
pub fn cubic_min_2d(g: [f64; 2], h: [[f64; 2]; 2], sigma: f64) -> Option<[f64; 2]> {
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let rad = (0.5 * (h[0][0] - h[1][1])).hypot(h[0][1]);
    let lmin = mean - rad;
    let mut lo = (-lmin).max(0.0);
    let phi = |l: f64| norm2(shifted_solve(h, g, l)) - 2.0 * l / sigma;
    let mut hi = lo.max(1.0);
    while phi(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    if lo > 0.0 && !(phi(lo * (1.0 + 1e-15) + 1e-300) > 0.0) {
        return None;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = if phi(lo).abs() < phi(hi).abs() { lo } else { hi };
    Some(shifted_solve(h, g, l))
}

/// Full-space `p = 2` iteration on the two-variable Rosenbrock function,
/// written out from the recurrences: `σ₀ = ν₀`, then `μ` from the observed
/// model-gradient discrepancy and `σ = max(ϑν, ξμ)`; every step accepted
/// and `ν ← ν(1 + ‖s‖³)`.
pub fn reference_rosenbrock(params: ReferenceParams, iterations: usize) -> Vec<ReferenceIterate> {
    let mut x = [-1.2, 1.0];
    let (mut nu, mut mu) = (params.nu0, params.mu_init);
    let mut prev: Option<(f64, f64)> = None;
    let mut out = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let g = rosen_grad(x);
        let h = rosen_hess(x);
        if let Some((model_grad, snorm)) = prev {
            let ratio = (norm2(g) - model_grad) / (params.kappa * snorm * snorm);
            mu = mu.max(ratio);
        }
        let sigma = if k == 0 {
            nu
        } else {
            (params.vartheta * nu).max(params.xi * mu)
        };
        out.push(ReferenceIterate { x, sigma, nu, mu });
        let s = cubic_min_2d(g, h, sigma).expect("hard case on Rosenbrock");
        let hs = [h[0][0] * s[0] + h[0][1] * s[1], h[1][0] * s[0] + h[1][1] * s[1]];
        let snorm = norm2(s);
        prev = Some((norm2([g[0] + hs[0], g[1] + hs[1]]), snorm));
        x = [x[0] + s[0], x[1] + s[1]];
        nu *= 1.0 + snorm.powi(3);
    }
    out
}

/// Minimizes `f` over the box `[−r, r]^d` (`d ∈ {1, 2}`) by repeatedly
/// refining a uniform grid around the incumbent.
pub fn grid_minimize(f: &dyn Fn(&[f64]) -> f64, dim: usize, radius: f64) -> Vec<f64> {
    assert!(dim == 1 || dim == 2);
    const POINTS: usize = 401;
    let mut center = vec![0.0; dim];
    let mut half = radius;
    let mut best = center.clone();
    let mut best_val = f(&best);
    for _ in 0..12 {
        let step = 2.0 * half / (POINTS - 1) as f64;
        let coord = |c: f64, i: usize| c - half + i as f64 * step;
        let mut try_point = |p: Vec<f64>| {
            let v = f(&p);
            if v < best_val {
                best_val = v;
                best = p;
            }
        };
        if dim == 1 {
            for i in 0..POINTS {
                try_point(vec![coord(center[0], i)]);
            }
        } else {
            for i in 0..POINTS {
                for j in 0..POINTS {
                    try_point(vec![coord(center[0], i), coord(center[1], j)]);
                }
            }
        }
        center = best.clone();
        half = 4.0 * step;
    }
    best
}

/// Cubic model value written out directly.
pub fn cubic_value(g: &[f64], h: &[Vec<f64>], sigma: f64, u: &[f64]) -> f64 {
    let d = g.len();
    let mut lin = 0.0;
    let mut quad = 0.0;
    let mut nn = 0.0;
    for i in 0..d {
        lin += g[i] * u[i];
        nn += u[i] * u[i];
        for j in 0..d {
            quad += u[i] * h[i][j] * u[j];
        }
    }
    lin + 0.5 * quad + sigma / 6.0 * nn.sqrt().powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_gradient_matches_finite_differences() {
        let x = [0.3, -0.7];
        let g = rosen_grad(x);
        let f = |x: [f64; 2]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let h = 1e-6;
        let fd0 = (f([x[0] + h, x[1]]) - f([x[0] - h, x[1]])) / (2.0 * h);
        let fd1 = (f([x[0], x[1] + h]) - f([x[0], x[1] - h])) / (2.0 * h);
        assert!((fd0 - g[0]).abs() < 1e-6 && (fd1 - g[1]).abs() < 1e-6);
    }

    #[test]
    fn bisection_solver_satisfies_optimality() {
        let g = [1.0, -2.0];
        let h = [[-1.0, 0.5], [0.5, 3.0]];
        let sigma = 2.0;
        let s = cubic_min_2d(g, h, sigma).unwrap();
        let r = norm2(s);
        let res = [
            g[0] + h[0][0] * s[0] + h[0][1] * s[1] + 0.5 * sigma * r * s[0],
            g[1] + h[1][0] * s[0] + h[1][1] * s[1] + 0.5 * sigma * r * s[1],
        ];
        assert!(norm2(res) < 1e-12);
    }

    #[test]
    fn grid_agrees_with_bisection() {
        let g = [0.4, 1.0];
        let h = [[2.0, -1.0], [-1.0, -0.5]];
        let s = cubic_min_2d(g, h, 3.0).unwrap();
        let hv = vec![h[0].to_vec(), h[1].to_vec()];
        let u = grid_minimize(&|u| cubic_value(&g, &hv, 3.0, u), 2, 5.0);
        assert!((u[0] - s[0]).abs() < 1e-6 && (u[1] - s[1]).abs() < 1e-6);
    }

    #[test]
    fn hard_case_is_reported() {
        assert!(cubic_min_2d([0.0, 1.0], [[-1.0, 0.0], [0.0, 1.0]], 1.0).is_none());
    }
}
