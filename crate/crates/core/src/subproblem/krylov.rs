use nalgebra::{DMatrix, DVector};

use super::cubic::cubic_reg_exact;
use crate::Result;

/// Lanczos solve of `min gᵀu + ½ uᵀHu + (σ/6)‖u‖³` with `H` given as an
/// operator.
///
/// Builds an orthonormal basis of the Krylov space `K_j(H, g)` with full
/// reorthogonalization and solves the tridiagonal reduced problem exactly at
/// every step. The residual of the full problem at the lifted point is
/// `β_j |y_j|`, so the iteration stops once that falls below
/// `tol (1 + ‖g‖)` or the space becomes invariant. Returns `None` when
/// neither happens within `max_dim` steps, or when `g = 0`; callers then use
/// the dense path.
pub(crate) fn cubic_reg_krylov<F>(
    g: &DVector<f64>,
    op: F,
    sigma: f64,
    tol: f64,
    max_dim: usize,
) -> Result<Option<DVector<f64>>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let gnorm = g.norm();
    if gnorm == 0.0 || !gnorm.is_finite() {
        return Ok(None);
    }
    let max_dim = max_dim.min(g.len());
    let mut basis: Vec<DVector<f64>> = vec![g / gnorm];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut op_scale = 0.0f64;

    loop {
        let j = basis.len() - 1;
        let mut w = op(&basis[j]);
        op_scale = op_scale.max(w.norm());
        let alpha = basis[j].dot(&w);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();
        alphas.push(alpha);

        let dim = j + 1;
        let t = DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                alphas[r]
            } else if r == c + 1 {
                betas[c]
            } else if c == r + 1 {
                betas[r]
            } else {
                0.0
            }
        });
        let mut e1 = DVector::zeros(dim);
        e1[0] = gnorm;
        let y = cubic_reg_exact(&e1, &t, sigma)?;
        let residual = beta * y[j].abs();
        let invariant = beta <= 1e-13 * op_scale.max(f64::MIN_POSITIVE);
        if residual <= tol * (1.0 + gnorm) || invariant {
            let mut u = DVector::zeros(g.len());
            for (yi, q) in y.iter().zip(&basis) {
                u.axpy(*yi, q, 1.0);
            }
            return Ok(Some(u));
        }
        if dim >= max_dim {
            return Ok(None);
        }
        betas.push(beta);
        basis.push(w / beta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn low_rank_operator_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 150;
        let a = gaussian(m, 3, &mut rng);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, -1.5, 0.5]));
        let h = &a * d * a.transpose();
        let g = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let sigma = 0.8;
        let dense = cubic_reg_exact(&g, &h, sigma).unwrap();
        let krylov = cubic_reg_krylov(&g, |v| &h * v, sigma, 1e-12, 50)
            .unwrap()
            .expect("rank-3 operator converges in a few steps");
        assert!((&dense - &krylov).norm() <= 1e-8 * (1.0 + dense.norm()));
    }

    #[test]
    fn full_rank_operator_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = 60;
        let b = gaussian(m, m, &mut rng);
        let h = (&b + b.transpose()) * 0.1;
        let g = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let dense = cubic_reg_exact(&g, &h, 2.0).unwrap();
        let krylov = cubic_reg_krylov(&g, |v| &h * v, 2.0, 1e-12, m).unwrap().unwrap();
        assert!((&dense - &krylov).norm() <= 1e-8 * (1.0 + dense.norm()));
    }

    #[test]
    fn zero_gradient_defers_to_dense() {
        let h = DMatrix::<f64>::identity(4, 4);
        let r = cubic_reg_krylov(&DVector::zeros(4), |v| &h * v, 1.0, 1e-12, 4).unwrap();
        assert!(r.is_none());
    }
}
