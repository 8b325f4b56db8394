//! Sketched regularised models and their minimizers.
//!
//! For degree `p` the model in the reduced variable `ŝ ∈ ℝ^ℓ` is
//! `m̂(ŝ) = ĝᵀŝ [+ ½ ŝᵀĤŝ] + σ/(p+1)! ‖Sᵀŝ‖^{p+1}`, and the quadratically
//! regularised variant is `ĝᵀŝ + ½ ŝᵀB̂ŝ + ½ σ ‖Sᵀŝ‖²`. Here
//! `‖Sᵀŝ‖² = ŝᵀWŝ` with `W = SSᵀ`.

mod cubic;
mod krylov;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use cubic::{cubic_model_value, cubic_reg_exact};

use crate::sketch::SketchOperator;
use crate::{Error, Result};

/// Relative slack on the gradient-step test that absorbs rounding when the
/// condition holds with equality in exact arithmetic.
pub const GRADSTEP_ROUNDING: f64 = 16.0 * f64::EPSILON;

/// Largest admissible estimate of `cond(W)` before the sketch is rejected.
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// Above this reduced dimension the cubic subproblem is solved by Lanczos.
const KRYLOV_THRESHOLD: usize = 100;
const KRYLOV_MAX_DIM: usize = 300;
const KRYLOV_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regulariser {
    /// `σ/(p+1)! ‖Sᵀŝ‖^{p+1}`
    Power,
    /// `½ σ ‖Sᵀŝ‖²` with a quadratic term built from `B`.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// Whiten with `W = LLᵀ` and solve the cubic problem in `u = Lᵀŝ`.
    #[default]
    WhitenedExact,
    /// Regularise with `‖ŝ‖³` instead of `‖Sᵀŝ‖³`, falling back to the
    /// whitened solve when the termination conditions fail.
    EuclidApprox,
}

#[derive(Debug, Clone)]
pub struct SketchedModel {
    pub ghat: DVector<f64>,
    /// `S H Sᵀ` or `S B Sᵀ`; `None` for a first-order model.
    pub hhat: Option<DMatrix<f64>>,
    pub gram: DMatrix<f64>,
    pub sigma: f64,
    pub degree: usize,
    pub reg: Regulariser,
    /// The sketch that produced the model, when known. Used to lift `ŝ`.
    pub sketch: Option<SketchOperator>,
}

/// `S A Sᵀ` for a symmetric operator `A`, from `ℓ` operator applications.
pub fn sketch_operator<F>(sketch: &SketchOperator, op: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let s = sketch.matrix();
    let (rows, n) = (s.nrows(), s.ncols());
    let mut ast = DMatrix::zeros(n, rows);
    for i in 0..rows {
        let col = op(&s.row(i).transpose());
        ast.set_column(i, &col);
    }
    let h = s * ast;
    (&h + h.transpose()) * 0.5
}

impl SketchedModel {
    pub fn new(
        ghat: DVector<f64>,
        hhat: Option<DMatrix<f64>>,
        gram: DMatrix<f64>,
        sigma: f64,
        degree: usize,
        reg: Regulariser,
    ) -> Result<Self> {
        let l = ghat.len();
        if l == 0 {
            return Err(Error::InvalidArgument("empty model".into()));
        }
        if gram.nrows() != l || gram.ncols() != l {
            return Err(Error::InvalidArgument("W has the wrong shape".into()));
        }
        if let Some(h) = &hhat {
            if h.nrows() != l || h.ncols() != l {
                return Err(Error::InvalidArgument("Ĥ has the wrong shape".into()));
            }
            let asym = (h - h.transpose()).amax();
            if asym > 1e-12 * h.amax().max(1.0) {
                return Err(Error::InvalidArgument(format!("Ĥ is not symmetric ({asym:e})")));
            }
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        match (degree, reg, hhat.is_some()) {
            (1, Regulariser::Power, false) | (2, Regulariser::Power, true) => {}
            (2, Regulariser::Quadratic, true) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unsupported model: degree {degree}, {reg:?}, curvature {}",
                    hhat.is_some()
                )))
            }
        }
        if !ghat.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("sketched gradient"));
        }
        Ok(Self {
            ghat,
            hhat,
            gram,
            sigma,
            degree,
            reg,
            sketch: None,
        })
    }

    /// First-order model `ĝᵀŝ + σ/2 ‖Sᵀŝ‖²`.
    pub fn first_order(sketch: SketchOperator, g: &DVector<f64>, sigma: f64) -> Result<Self> {
        let mut m = Self::new(sketch.apply(g), None, sketch.gram(), sigma, 1, Regulariser::Power)?;
        m.sketch = Some(sketch);
        Ok(m)
    }

    /// Cubic model with `Ĥ = S H Sᵀ` from Hessian-vector products.
    pub fn cubic<F>(sketch: SketchOperator, g: &DVector<f64>, hess_vec: F, sigma: f64) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let h = sketch_operator(&sketch, hess_vec);
        let mut m = Self::new(sketch.apply(g), Some(h), sketch.gram(), sigma, 2, Regulariser::Power)?;
        m.sketch = Some(sketch);
        Ok(m)
    }

    /// Quadratically regularised model with `B̂ = S B Sᵀ`.
    pub fn quadratic_reg<F>(sketch: SketchOperator, g: &DVector<f64>, b_op: F, sigma: f64) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let b = sketch_operator(&sketch, b_op);
        let mut m = Self::new(
            sketch.apply(g),
            Some(b),
            sketch.gram(),
            sigma,
            2,
            Regulariser::Quadratic,
        )?;
        m.sketch = Some(sketch);
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.ghat.len()
    }

    /// `‖Sᵀŝ‖`
    pub fn w_norm(&self, shat: &DVector<f64>) -> f64 {
        shat.dot(&(&self.gram * shat)).max(0.0).sqrt()
    }

    fn curvature(&self, shat: &DVector<f64>) -> f64 {
        self.hhat.as_ref().map_or(0.0, |h| shat.dot(&(h * shat)))
    }

    /// `T̂(0) − T̂(ŝ) = −(ĝᵀŝ + ½ ŝᵀĤŝ)`
    pub fn taylor_decrease(&self, shat: &DVector<f64>) -> f64 {
        -(self.ghat.dot(shat) + 0.5 * self.curvature(shat))
    }

    pub fn regulariser(&self, shat: &DVector<f64>) -> f64 {
        let r = self.w_norm(shat);
        match self.reg {
            Regulariser::Power => self.sigma / factorial(self.degree + 1) * r.powi(self.degree as i32 + 1),
            Regulariser::Quadratic => 0.5 * self.sigma * r * r,
        }
    }

    /// `m̂(ŝ)`; note `m̂(0) = 0`.
    pub fn value(&self, shat: &DVector<f64>) -> f64 {
        -self.taylor_decrease(shat) + self.regulariser(shat)
    }

    /// `∇_ŝ T̂ = ĝ + Ĥŝ`
    pub fn taylor_gradient(&self, shat: &DVector<f64>) -> DVector<f64> {
        match &self.hhat {
            Some(h) => &self.ghat + h * shat,
            None => self.ghat.clone(),
        }
    }

    fn factor_gram(&self) -> Result<Cholesky<f64, Dyn>> {
        let chol = Cholesky::new(self.gram.clone())
            .ok_or_else(|| Error::DegenerateSketch("W = SSᵀ is not positive definite".into()))?;
        let d = chol.l_dirty().diagonal();
        let cond = (d.max() / d.min()).powi(2);
        if !(cond < GRAM_COND_LIMIT) {
            return Err(Error::DegenerateSketch(format!("cond(W) estimate {cond:.3e}")));
        }
        Ok(chol)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conditions {
    pub descent: bool,
    pub gradstep: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `m̂(0) − m̂(ŝ)`
    pub model_decrease: f64,
    pub taylor_decrease: f64,
}

/// Evaluates the descent and gradient-step conditions for `ŝ` on `model`.
///
/// For the power regulariser the step condition reads
/// `‖ĝ + Ĥŝ‖ ≤ θ σ/p! ‖Sᵀŝ‖^{p−1} ‖Wŝ‖`; for the quadratic one it is
/// `‖ĝ + B̂ŝ‖ ≤ θ σ ‖Wŝ‖`, up to [`GRADSTEP_ROUNDING`].
pub fn verify_conditions(model: &SketchedModel, shat: &DVector<f64>, theta: f64) -> Conditions {
    let wshat = &model.gram * shat;
    let r = shat.dot(&wshat).max(0.0).sqrt();
    let lhs = model.taylor_gradient(shat).norm();
    let rhs = match model.reg {
        Regulariser::Power => {
            theta * model.sigma / factorial(model.degree) * r.powi(model.degree as i32 - 1) * wshat.norm()
        }
        Regulariser::Quadratic => theta * model.sigma * wshat.norm(),
    };
    let model_decrease = -model.value(shat);
    Conditions {
        descent: model_decrease > 0.0,
        gradstep: lhs <= rhs * (1.0 + GRADSTEP_ROUNDING),
        lhs,
        rhs,
        model_decrease,
        taylor_decrease: model.taylor_decrease(shat),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub shat: DVector<f64>,
    /// `Sᵀŝ`, present when the model carries its sketch.
    pub s: Option<DVector<f64>>,
    pub grad_model_norm: f64,
    pub model_decrease: f64,
    pub taylor_decrease: f64,
    pub cond_descent: bool,
    pub cond_gradstep: bool,
    pub gradstep_lhs: f64,
    pub gradstep_rhs: f64,
    /// The approximate solve failed its checks and the exact one was used.
    pub fell_back: bool,
}

impl SubproblemSolution {
    fn assemble(model: &SketchedModel, shat: DVector<f64>, theta: f64, fell_back: bool) -> Self {
        let c = verify_conditions(model, &shat, theta);
        let s = model.sketch.as_ref().map(|sk| sk.apply_t(&shat));
        Self {
            s,
            grad_model_norm: c.lhs,
            model_decrease: c.model_decrease,
            taylor_decrease: c.taylor_decrease,
            cond_descent: c.descent,
            cond_gradstep: c.gradstep,
            gradstep_lhs: c.lhs,
            gradstep_rhs: c.rhs,
            fell_back,
            shat,
        }
    }
}

fn check_model(model: &SketchedModel, degree: usize, reg: Regulariser) -> Result<()> {
    if model.degree != degree || model.reg != reg {
        return Err(Error::InvalidArgument(format!(
            "expected degree {degree} {reg:?} model, got degree {} {:?}",
            model.degree, model.reg
        )));
    }
    Ok(())
}

/// Exact minimizer `ŝ = −W⁻¹ĝ/σ` of the first-order model.
pub fn solve_p1(model: &SketchedModel, theta: f64) -> Result<SubproblemSolution> {
    check_model(model, 1, Regulariser::Power)?;
    let chol = model.factor_gram()?;
    let shat = chol.solve(&model.ghat) * (-1.0 / model.sigma);
    Ok(SubproblemSolution::assemble(model, shat, theta, false))
}

/// Minimizer of the cubic model with the `‖Sᵀŝ‖³` regulariser.
pub fn solve_p2(model: &SketchedModel, theta: f64, mode: SolveMode) -> Result<SubproblemSolution> {
    check_model(model, 2, Regulariser::Power)?;
    if mode == SolveMode::EuclidApprox {
        let h = model.hhat.as_ref().expect("checked");
        let shat = minimize_cubic(&model.ghat, h, |v| h * v, model.sigma)?;
        let sol = SubproblemSolution::assemble(model, shat, theta, false);
        if sol.cond_descent && sol.cond_gradstep {
            return Ok(sol);
        }
        let mut exact = solve_whitened(model, theta)?;
        exact.fell_back = true;
        return Ok(exact);
    }
    solve_whitened(model, theta)
}

fn solve_whitened(model: &SketchedModel, theta: f64) -> Result<SubproblemSolution> {
    let chol = model.factor_gram()?;
    let l = chol.l();
    let h = model.hhat.as_ref().expect("checked");
    let gt = l
        .solve_lower_triangular(&model.ghat)
        .ok_or_else(|| Error::DegenerateSketch("singular Cholesky factor".into()))?;
    let whitened_op = |v: &DVector<f64>| -> DVector<f64> {
        let y = l.tr_solve_lower_triangular(v).expect("nonsingular factor");
        l.solve_lower_triangular(&(h * y)).expect("nonsingular factor")
    };
    let dense = || -> DMatrix<f64> {
        let x = l.solve_lower_triangular(h).expect("nonsingular factor");
        let ht = l.solve_lower_triangular(&x.transpose()).expect("nonsingular factor");
        (&ht + ht.transpose()) * 0.5
    };
    let u = if model.dim() > KRYLOV_THRESHOLD {
        match krylov::cubic_reg_krylov(&gt, whitened_op, model.sigma, KRYLOV_TOL, KRYLOV_MAX_DIM)? {
            Some(u) => u,
            None => cubic_reg_exact(&gt, &dense(), model.sigma)?,
        }
    } else {
        cubic_reg_exact(&gt, &dense(), model.sigma)?
    };
    let shat = l
        .tr_solve_lower_triangular(&u)
        .ok_or_else(|| Error::DegenerateSketch("singular Cholesky factor".into()))?;
    Ok(SubproblemSolution::assemble(model, shat, theta, false))
}

fn minimize_cubic<F>(g: &DVector<f64>, h: &DMatrix<f64>, op: F, sigma: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if g.len() > KRYLOV_THRESHOLD {
        if let Some(u) = krylov::cubic_reg_krylov(g, op, sigma, KRYLOV_TOL, KRYLOV_MAX_DIM)? {
            return Ok(u);
        }
    }
    cubic_reg_exact(g, h, sigma)
}

/// Exact minimizer of the quadratically regularised model:
/// `(B̂ + σW) ŝ = −ĝ`.
pub fn solve_2b(model: &SketchedModel, theta: f64) -> Result<SubproblemSolution> {
    check_model(model, 2, Regulariser::Quadratic)?;
    // Same conditioning guard on W as the other solves.
    model.factor_gram()?;
    let b = model.hhat.as_ref().expect("checked");
    let k = b + &model.gram * model.sigma;
    let chol = Cholesky::new((&k + k.transpose()) * 0.5)
        .ok_or_else(|| Error::DegenerateSketch("B̂ + σW is not positive definite".into()))?;
    let shat = -chol.solve(&model.ghat);
    Ok(SubproblemSolution::assemble(model, shat, theta, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn diag(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&v(xs))
    }

    fn gaussian(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    fn random_spd(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = gaussian(m, m, rng);
        &a * a.transpose() + DMatrix::identity(m, m) * 0.1
    }

    fn random_symmetric(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = gaussian(m, m, rng);
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn p1_identity_gram() {
        let m = SketchedModel::new(v(&[1.0, 0.0]), None, DMatrix::identity(2, 2), 2.0, 1, Regulariser::Power)
            .unwrap();
        let sol = solve_p1(&m, 1.0).unwrap();
        assert_relative_eq!(sol.shat, v(&[-0.5, 0.0]), epsilon = 1e-15);
        assert_relative_eq!(sol.model_decrease, 0.25, epsilon = 1e-15);
        assert!(sol.cond_descent && sol.cond_gradstep);
    }

    #[test]
    fn p1_diagonal_gram_holds_with_equality() {
        let m = SketchedModel::new(v(&[2.0, 1.0]), None, diag(&[2.0, 1.0]), 1.0, 1, Regulariser::Power).unwrap();
        let sol = solve_p1(&m, 1.0).unwrap();
        assert_relative_eq!(sol.shat, v(&[-1.0, -1.0]), epsilon = 1e-15);
        assert_relative_eq!(sol.gradstep_lhs, 5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(sol.gradstep_rhs, 5f64.sqrt(), epsilon = 1e-15);
        assert!(sol.cond_gradstep);
    }

    #[test]
    fn p1_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let l = rng.random_range(1..30);
            let w = random_spd(l, &mut rng);
            let g = DVector::from_fn(l, |_, _| StandardNormal.sample(&mut rng));
            let sigma = rng.random_range(0.1..10.0);
            let m = SketchedModel::new(g.clone(), None, w.clone(), sigma, 1, Regulariser::Power).unwrap();
            let sol = solve_p1(&m, 1.0 + 1e-12).unwrap();
            let r = &w * &sol.shat * sigma + &g;
            assert!(r.norm() <= 1e-10 * g.norm());
            assert!(sol.cond_descent && sol.cond_gradstep);
        }
    }

    #[test]
    fn singular_gram_is_degenerate() {
        let m = SketchedModel::new(v(&[1.0, 1.0]), None, diag(&[1.0, 0.0]), 1.0, 1, Regulariser::Power).unwrap();
        assert!(matches!(solve_p1(&m, 1.0), Err(Error::DegenerateSketch(_))));
        let m = SketchedModel::new(v(&[1.0, 1.0]), None, diag(&[1.0, 1e-13]), 1.0, 1, Regulariser::Power).unwrap();
        assert!(matches!(solve_p1(&m, 1.0), Err(Error::DegenerateSketch(_))));
    }

    #[test]
    fn p2_modes_coincide_for_identity_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_symmetric(6, &mut rng);
        let g = DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
        let m = SketchedModel::new(g, Some(h), DMatrix::identity(6, 6), 1.3, 2, Regulariser::Power).unwrap();
        let a = solve_p2(&m, 1.01, SolveMode::WhitenedExact).unwrap();
        let b = solve_p2(&m, 1.01, SolveMode::EuclidApprox).unwrap();
        assert!(!b.fell_back);
        assert_relative_eq!(a.shat, b.shat, epsilon = 1e-12);
    }

    #[test]
    fn p2_scalar_matches_scaled_cubic() {
        // ‖Sᵀŝ‖ = √w |ŝ|, so ŝ = u/√w with u from the whitened problem.
        let (g, h, w, sigma) = (-3.0, 1.0, 4.0, 6.0);
        let m = SketchedModel::new(v(&[g]), Some(diag(&[h])), diag(&[w]), sigma, 2, Regulariser::Power).unwrap();
        let sol = solve_p2(&m, 1.01, SolveMode::WhitenedExact).unwrap();
        let rw = w.sqrt();
        let u = cubic_reg_exact(&v(&[g / rw]), &diag(&[h / w]), sigma).unwrap();
        assert_relative_eq!(sol.shat[0], u[0] / rw, max_relative = 1e-12);
        // direct check: 3u² + u/4 − 3/2 = 0 from the scalar stationarity
        let root = (-0.25 + (0.0625f64 + 18.0).sqrt()) / 6.0;
        assert_relative_eq!(u[0], root, max_relative = 1e-12);
    }

    #[test]
    fn p2_whitened_certifies_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let w = random_spd(10, &mut rng);
            let h = random_symmetric(10, &mut rng);
            let g = DVector::from_fn(10, |_, _| StandardNormal.sample(&mut rng));
            let m = SketchedModel::new(g, Some(h), w, rng.random_range(0.1..5.0), 2, Regulariser::Power).unwrap();
            let sol = solve_p2(&m, 1.01, SolveMode::WhitenedExact).unwrap();
            assert!(sol.cond_descent, "{sol:?}");
            assert!(sol.cond_gradstep, "{sol:?}");
            // gradient of the model vanishes at the minimizer
            let r = m.w_norm(&sol.shat);
            let grad = m.taylor_gradient(&sol.shat) + &m.gram * &sol.shat * (0.5 * m.sigma * r);
            assert!(grad.norm() <= 1e-8 * (1.0 + m.ghat.norm()));
        }
    }

    #[test]
    fn p2_whitened_beats_random_trial_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let l = rng.random_range(1..6);
            let w = random_spd(l, &mut rng);
            let h = random_symmetric(l, &mut rng);
            let g = DVector::from_fn(l, |_, _| StandardNormal.sample(&mut rng));
            let m = SketchedModel::new(g, Some(h), w, rng.random_range(0.2..4.0), 2, Regulariser::Power).unwrap();
            let sol = solve_p2(&m, 1.01, SolveMode::WhitenedExact).unwrap();
            let best = m.value(&sol.shat);
            let scale = 3.0 * (1.0 + sol.shat.norm());
            for _ in 0..1000 {
                let z = DVector::from_fn(l, |_, _| rng.random_range(-scale..scale));
                assert!(best <= m.value(&z) + 1e-12);
            }
        }
    }

    #[test]
    fn p2_krylov_path_matches_dense_on_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (l, n) = (150, 400);
        let sketch = SketchOperator::sample(l, n, &mut rng).unwrap();
        let a = gaussian(n, 2, &mut rng);
        let hfull = &a * diag(&[3.0, -1.0]) * a.transpose();
        let g = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let m = SketchedModel::cubic(sketch, &g, |x| &hfull * x, 0.7).unwrap();
        let sol = solve_p2(&m, 1.01, SolveMode::WhitenedExact).unwrap();
        // dense reference through the same whitening
        let chol = Cholesky::new(m.gram.clone()).unwrap();
        let lf = chol.l();
        let gt = lf.solve_lower_triangular(&m.ghat).unwrap();
        let x = lf.solve_lower_triangular(m.hhat.as_ref().unwrap()).unwrap();
        let ht = lf.solve_lower_triangular(&x.transpose()).unwrap();
        let u = cubic_reg_exact(&gt, &((&ht + ht.transpose()) * 0.5), 0.7).unwrap();
        let shat = lf.tr_solve_lower_triangular(&u).unwrap();
        let s_ref = m.sketch.as_ref().unwrap().apply_t(&shat);
        let s = sol.s.unwrap();
        assert!((&s - &s_ref).norm() <= 1e-7 * (1.0 + s_ref.norm()));
        assert!(sol.cond_descent && sol.cond_gradstep);
    }

    #[test]
    fn lifted_step_is_exact() {
        let sketch = SketchOperator::from_seed(3, 8, 11).unwrap();
        let g = DVector::from_fn(8, |i, _| i as f64 - 3.5);
        let m = SketchedModel::first_order(sketch.clone(), &g, 2.0).unwrap();
        let sol = solve_p1(&m, 1.0).unwrap();
        assert_eq!(sol.s.unwrap(), sketch.apply_t(&sol.shat));
    }

    #[test]
    fn b_zero_gives_gradient_step() {
        let m = SketchedModel::new(
            v(&[2.0, -4.0]),
            Some(DMatrix::zeros(2, 2)),
            DMatrix::identity(2, 2),
            2.0,
            2,
            Regulariser::Quadratic,
        )
        .unwrap();
        let sol = solve_2b(&m, 1.0).unwrap();
        assert_relative_eq!(sol.shat, v(&[-1.0, 2.0]), epsilon = 1e-15);
    }

    #[test]
    fn b_diagonal_example() {
        let m = SketchedModel::new(
            v(&[2.0, 1.0]),
            Some(diag(&[1.0, 0.0])),
            DMatrix::identity(2, 2),
            1.0,
            2,
            Regulariser::Quadratic,
        )
        .unwrap();
        let sol = solve_2b(&m, 1.0).unwrap();
        assert_relative_eq!(sol.shat, v(&[-1.0, -1.0]), epsilon = 1e-15);
        assert!(sol.cond_descent && sol.cond_gradstep);
    }

    #[test]
    fn b_random_residuals_and_uniqueness() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let l = rng.random_range(1..20);
            let a = gaussian(l, 2.max(l / 2), &mut rng);
            let b = &a * a.transpose();
            let w = random_spd(l, &mut rng);
            let g = DVector::from_fn(l, |_, _| StandardNormal.sample(&mut rng));
            let sigma = rng.random_range(0.1..3.0);
            let m = SketchedModel::new(g.clone(), Some(b.clone()), w.clone(), sigma, 2, Regulariser::Quadratic)
                .unwrap();
            let sol = solve_2b(&m, 1.0 + 1e-12).unwrap();
            let r = (&b + &w * sigma) * &sol.shat + &g;
            assert!(r.norm() <= 1e-10 * g.norm());
            let diff = (sol.gradstep_lhs - sol.gradstep_rhs).abs();
            assert!(diff <= 1e-10 * (1.0 + sol.gradstep_rhs));
            assert!(sol.cond_descent && sol.cond_gradstep);
            assert_eq!(solve_2b(&m, 1.0).unwrap().shat, sol.shat);
        }
    }

    #[test]
    fn zero_step_is_not_descent() {
        let m = SketchedModel::new(v(&[1.0]), None, diag(&[1.0]), 1.0, 1, Regulariser::Power).unwrap();
        let c = verify_conditions(&m, &v(&[0.0]), 1.0);
        assert!(!c.descent);
    }

    #[test]
    fn perturbed_minimizer_flags_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let w = random_spd(4, &mut rng);
            let h = random_symmetric(4, &mut rng);
            let g = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
            let sigma = 1.5;
            let m = SketchedModel::new(g.clone(), Some(h.clone()), w.clone(), sigma, 2, Regulariser::Power).unwrap();
            let sol = solve_p2(&m, 1.01, SolveMode::WhitenedExact).unwrap();
            let s = &sol.shat * 1.5;
            let c = verify_conditions(&m, &s, 1.01);
            let r = s.dot(&(&w * &s)).sqrt();
            let mval = g.dot(&s) + 0.5 * s.dot(&(&h * &s)) + sigma / 6.0 * r.powi(3);
            let lhs = (&g + &h * &s).norm();
            let rhs = 1.01 * sigma / 2.0 * r * (&w * &s).norm();
            assert_eq!(c.descent, mval < 0.0);
            assert_eq!(c.gradstep, lhs <= rhs * (1.0 + GRADSTEP_ROUNDING));
            assert_relative_eq!(c.lhs, lhs, max_relative = 1e-14);
            assert_relative_eq!(c.rhs, rhs, max_relative = 1e-14);
        }
    }

    #[test]
    fn lower_bound_on_taylor_decrease() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let w = random_spd(5, &mut rng);
            let h = random_symmetric(5, &mut rng);
            let g = DVector::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
            let m = SketchedModel::new(g, Some(h), w, 0.9, 2, Regulariser::Power).unwrap();
            let sol = solve_p2(&m, 1.01, SolveMode::WhitenedExact).unwrap();
            let r = m.w_norm(&sol.shat);
            assert!(sol.taylor_decrease > 0.9 / 6.0 * r.powi(3));
        }
    }

    #[test]
    fn rejects_malformed_models() {
        assert!(SketchedModel::new(v(&[1.0]), None, diag(&[1.0]), 0.0, 1, Regulariser::Power).is_err());
        assert!(SketchedModel::new(v(&[1.0]), None, diag(&[1.0]), 1.0, 2, Regulariser::Power).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SketchedModel::new(v(&[1.0, 1.0]), Some(asym), DMatrix::identity(2, 2), 1.0, 2, Regulariser::Power)
            .is_err());
    }
}
