use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::functions::{LeastSquares, TestFunction};

/// The first `cols` columns of the `n × n` orthonormal DCT-II matrix
/// `C[k][j] = c_k cos(π (2j+1) k / 2n)`, `c_0 = √(1/n)`, `c_k = √(2/n)`.
pub fn dct_columns(n: usize, cols: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, cols, |k, j| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

/// `F(x) = f̂(Aᵀx)` for an `n × n̂` matrix `A` with orthonormal columns.
///
/// Every Hessian of `F` is `A ∇²f̂ Aᵀ`, so its rank never exceeds `n̂`.
pub struct EmbeddedProblem {
    base: Arc<dyn TestFunction>,
    basis: DMatrix<f64>,
}

impl EmbeddedProblem {
    /// Panics if the basis row count disagrees with the base dimension; the
    /// public entry point `problems::embed` validates first.
    pub fn new(base: Arc<dyn TestFunction>, basis: DMatrix<f64>) -> Self {
        assert_eq!(basis.ncols(), base.dim());
        Self { base, basis }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn base(&self) -> &Arc<dyn TestFunction> {
        &self.base
    }

    pub fn reduce(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(x)
    }

    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.basis * y
    }
}

impl TestFunction for EmbeddedProblem {
    fn dim(&self) -> usize {
        self.basis.nrows()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.base.value(&self.reduce(x))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.lift(&self.base.gradient(&self.reduce(x)))
    }

    fn hess_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.lift(&self.base.hess_vec(&self.reduce(x), &self.reduce(v)))
    }

    fn least_squares(&self) -> Option<&dyn LeastSquares> {
        self.base.least_squares().map(|_| self as &dyn LeastSquares)
    }
}

impl LeastSquares for EmbeddedProblem {
    fn n_residuals(&self) -> usize {
        self.base.least_squares().map_or(0, |ls| ls.n_residuals())
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let ls = self.base.least_squares().expect("residual structure");
        ls.residuals(&self.reduce(x))
    }

    fn jac_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let ls = self.base.least_squares().expect("residual structure");
        ls.jac_vec(&self.reduce(x), &self.reduce(v))
    }

    fn jac_t_vec(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let ls = self.base.least_squares().expect("residual structure");
        self.lift(&ls.jac_t_vec(&self.reduce(x), w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_columns_are_orthonormal() {
        for (n, m) in [(4, 4), (10, 2), (37, 5), (200, 12)] {
            let a = dct_columns(n, m);
            let gram = a.tr_mul(&a);
            let err = (gram - DMatrix::identity(m, m)).abs().max();
            assert!(err < 1e-12, "n={n} m={m} err={err}");
        }
    }

    #[test]
    fn square_dct_is_orthogonal_both_ways() {
        let c = dct_columns(16, 16);
        let err = (&c * c.transpose() - DMatrix::identity(16, 16)).abs().max();
        assert!(err < 1e-12);
    }
}
