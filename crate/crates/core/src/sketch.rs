//! Scaled Gaussian sketches and checkers for the one-sided embedding
//! property `‖S M z‖ ≥ α ‖M z‖`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::{Error, Result};

/// An `ℓ × n` sketching matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    matrix: DMatrix<f64>,
}

impl SketchOperator {
    /// Draws `S` with i.i.d. `N(0, 1/ℓ)` entries, so `E‖Sx‖² = ‖x‖²`.
    pub fn sample<R: Rng + ?Sized>(rows: usize, n: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 || rows > n {
            return Err(Error::InvalidArgument(format!(
                "sketch needs 1 <= rows <= n, got rows={rows}, n={n}"
            )));
        }
        let scale = 1.0 / (rows as f64).sqrt();
        let matrix = DMatrix::from_fn(rows, n, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        });
        Ok(Self { matrix })
    }

    pub fn from_seed(rows: usize, n: usize, seed: u64) -> Result<Self> {
        Self::sample(rows, n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// `S = I`, which turns the sketched method into its full-space parent.
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `S x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// `Sᵀ y`
    pub fn apply_t(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(y)
    }

    /// `S M` for a dense `n × m` matrix.
    pub fn apply_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.matrix * m
    }

    /// Gram matrix `W = S Sᵀ`, symmetrized.
    pub fn gram(&self) -> DMatrix<f64> {
        let w = &self.matrix * self.matrix.transpose();
        (&w + w.transpose()) * 0.5
    }
}

/// High-probability bound `β = 1.5 + √(n/ℓ)` on `‖S‖₂` for scaled Gaussian
/// sketches; also the default `κ_S` surrogate.
pub fn kappa_bound(rows: usize, n: usize) -> f64 {
    1.5 + (n as f64 / rows as f64).sqrt()
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 100_000;

/// Spectral norm of a dense matrix by power iteration on its smaller Gram
/// matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.tr_mul(m)
    };
    let k = gram.nrows();
    let mut v = DVector::from_fn(k, |i, _| 1.0 + 0.5 * (i as f64 * 1.3).sin()).normalize();
    let mut lambda = 0.0f64;
    for _ in 0..POWER_MAX_ITER {
        let w = &gram * &v;
        let next = v.dot(&w);
        if next <= 0.0 {
            // v landed in the null space of a PSD matrix: the matrix is zero
            // or the start was orthogonal to everything else.
            let wn = w.norm();
            if wn == 0.0 {
                return Ok(0.0);
            }
            v = w / wn;
            continue;
        }
        let residual = (&w - &v * next).norm();
        let change = (next - lambda).abs();
        lambda = next;
        if residual <= POWER_TOL * lambda || change <= 1e-14 * lambda {
            return Ok(lambda.sqrt());
        }
        let wn = w.norm();
        v = w / wn;
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        iterations: POWER_MAX_ITER,
    })
}

/// `‖S‖₂` by power iteration.
pub fn operator_norm(s: &SketchOperator) -> Result<f64> {
    spectral_norm(s.matrix())
}

/// `M = [g, H]`, the matrix whose range a sketch has to embed.
pub fn taylor_matrix(g: &DVector<f64>, h: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let n = g.len();
    let extra = h.map_or(0, |h| h.ncols());
    let mut m = DMatrix::zeros(n, 1 + extra);
    m.set_column(0, g);
    if let Some(h) = h {
        m.view_mut((0, 1), (n, extra)).copy_from(h);
    }
    m
}

/// Orthonormal basis of `range(M)`, dropping singular values below
/// `1e-12 σ_max`.
fn range_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, false);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return Err(Error::InvalidArgument("M must be nonzero".into()));
    }
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-12 * smax)
        .map(|(i, _)| i)
        .collect();
    Ok(u.select_columns(keep.iter()))
}

fn restricted_margin(s: &SketchOperator, basis: &DMatrix<f64>) -> f64 {
    if basis.ncols() > s.rows() {
        return 0.0;
    }
    let su = s.apply_mat(basis);
    su.singular_values().min().max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingReport {
    /// Largest `α` with `‖S M z‖ ≥ α ‖M z‖` for all `z`.
    pub margin: f64,
    pub alpha_target: f64,
    pub passed: bool,
    pub rank: usize,
    pub snorm: f64,
    /// `β = 1.5 + √(n/ℓ)`
    pub smax_bound: f64,
}

/// Embedding quality of `S` on `range(M)`: `σ_min(S U)` for an orthonormal
/// basis `U` of `range(M)`.
pub fn embedding_margin(
    s: &SketchOperator,
    m: &DMatrix<f64>,
    alpha_target: f64,
) -> Result<EmbeddingReport> {
    if m.nrows() != s.cols() {
        return Err(Error::InvalidArgument(format!(
            "M has {} rows but S has {} columns",
            m.nrows(),
            s.cols()
        )));
    }
    let basis = range_basis(m)?;
    let margin = restricted_margin(s, &basis);
    Ok(EmbeddingReport {
        margin,
        alpha_target,
        passed: margin >= alpha_target,
        rank: basis.ncols(),
        snorm: operator_norm(s)?,
        smax_bound: kappa_bound(s.rows(), s.cols()),
    })
}

/// Independent per-trial seed, so Monte-Carlo results do not depend on how
/// trials are split across workers.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityEstimate {
    pub trials: usize,
    pub successes: usize,
    pub estimate: f64,
    /// 95% Wilson score interval.
    pub interval: (f64, f64),
    pub rank: usize,
    /// `ℓ (1 − α_S) / C_ℓ` with the unknown absolute constant `C_ℓ` set to 1.
    pub rank_threshold: f64,
    pub rank_condition_holds: bool,
}

pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte-Carlo estimate of `P(margin ≥ α_S)` over fresh `ℓ × n` Gaussian
/// sketches.
pub fn estimate_true_probability(
    rows: usize,
    n: usize,
    m: &DMatrix<f64>,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    if trials < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 trials required, got {trials}"
        )));
    }
    if m.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "M has {} rows, expected {n}",
            m.nrows()
        )));
    }
    let basis = range_basis(m)?;
    let successes = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let s = SketchOperator::from_seed(rows, n, derive_seed(seed, t))?;
            Ok(usize::from(restricted_margin(&s, &basis) >= alpha))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let rank = basis.ncols();
    let rank_threshold = rows as f64 * (1.0 - alpha);
    Ok(ProbabilityEstimate {
        trials,
        successes,
        estimate: successes as f64 / trials as f64,
        interval: wilson_interval(successes, trials),
        rank,
        rank_threshold,
        rank_condition_holds: (rank as f64) < rank_threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEmbeddingReport {
    pub snorm: f64,
    pub smax: f64,
    /// `‖S g‖ / ‖g‖`
    pub grad_ratio: f64,
    pub alpha: f64,
    /// `‖S H‖₂`
    pub sh_norm: f64,
    /// `√(γ ‖g_{k+1}‖)`
    pub sh_bound: f64,
    pub passed: bool,
}

/// Checks the sparse-Hessian embedding conditions
/// `‖S‖ ≤ S_max`, `‖S g‖ ≥ α ‖g‖`, `‖S H‖ ≤ √(γ ‖g_next‖)`.
pub fn check_sparse_embedding(
    s: &SketchOperator,
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    g_next_norm: f64,
    alpha: f64,
    gamma: f64,
    smax: f64,
) -> Result<SparseEmbeddingReport> {
    let snorm = operator_norm(s)?;
    let gn = g.norm();
    let grad_ratio = if gn > 0.0 { s.apply(g).norm() / gn } else { 1.0 };
    let sh_norm = spectral_norm(&s.apply_mat(h))?;
    let sh_bound = (gamma * g_next_norm).sqrt();
    Ok(SparseEmbeddingReport {
        snorm,
        smax,
        grad_ratio,
        alpha,
        sh_norm,
        sh_bound,
        passed: snorm <= smax && grad_ratio >= alpha && sh_norm <= sh_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(SketchOperator::from_seed(0, 5, 1).is_err());
        assert!(SketchOperator::from_seed(6, 5, 1).is_err());
    }

    #[test]
    fn kappa_bound_values() {
        assert_eq!(kappa_bound(7, 7), 2.5);
        assert_eq!(kappa_bound(1, 100), 11.5);
        assert_eq!(kappa_bound(100, 10_000), 11.5);
    }

    #[test]
    fn norm_of_identity_and_scaled_blocks() {
        let s = SketchOperator::from_matrix(DMatrix::identity(3, 8));
        assert_relative_eq!(operator_norm(&s).unwrap(), 1.0, max_relative = 1e-8);
        let s = SketchOperator::from_matrix(DMatrix::identity(3, 8) * 2.0);
        assert_relative_eq!(operator_norm(&s).unwrap(), 2.0, max_relative = 1e-8);
    }

    #[test]
    fn power_iteration_matches_svd() {
        for seed in 0..20 {
            let s = SketchOperator::from_seed(15, 60, seed).unwrap();
            let exact = s.matrix().singular_values().max();
            let approx = operator_norm(&s).unwrap();
            assert!((exact - approx).abs() <= 1e-6 * exact, "seed {seed}");
        }
    }

    #[test]
    fn mean_squared_norm_ratio_is_one() {
        let n = 40;
        let x = DVector::from_fn(n, |i, _| (i as f64).cos() + 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 10_000;
        let mean = (0..trials)
            .map(|_| {
                let s = SketchOperator::sample(5, n, &mut rng).unwrap();
                s.apply(&x).norm_squared() / x.norm_squared()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 1.0).abs() <= 0.05, "mean {mean}");
    }

    #[test]
    fn orthogonal_sketch_has_unit_margin() {
        let q = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) as f64).sin())
            .qr()
            .q();
        let s = SketchOperator::from_matrix(q);
        let m = DMatrix::from_fn(6, 2, |i, j| (i + 2 * j) as f64 - 2.5);
        let r = embedding_margin(&s, &m, 0.9).unwrap();
        assert_relative_eq!(r.margin, 1.0, max_relative = 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn rank_one_coordinate_margin() {
        let s = SketchOperator::from_matrix(DMatrix::identity(2, 3));
        let m = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let r = embedding_margin(&s, &m, 0.5).unwrap();
        assert_relative_eq!(r.margin, 1.0, max_relative = 1e-12);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn margin_handles_rank_deficient_m() {
        let s = SketchOperator::from_seed(4, 10, 2).unwrap();
        let col = DVector::from_fn(10, |i, _| i as f64 + 1.0);
        let m = DMatrix::from_columns(&[col.clone(), col.clone() * 2.0, col * -1.0]);
        let r = embedding_margin(&s, &m, 0.0).unwrap();
        assert_eq!(r.rank, 1);
        assert!(r.margin > 0.0);
    }

    #[test]
    fn zero_m_is_rejected() {
        let s = SketchOperator::from_seed(2, 4, 2).unwrap();
        assert!(embedding_margin(&s, &DMatrix::zeros(4, 2), 0.5).is_err());
    }

    #[test]
    fn margin_is_the_minimum_norm_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = SketchOperator::sample(6, 30, &mut rng).unwrap();
        let m = DMatrix::from_fn(30, 3, |i, j| ((i * (j + 2)) as f64 * 0.37).sin());
        let r = embedding_margin(&s, &m, 0.0).unwrap();
        let sm = s.apply_mat(&m);
        let mut sampled = f64::INFINITY;
        for _ in 0..10_000 {
            let z = DVector::from_fn(3, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            });
            let ratio = (&sm * &z).norm() / (&m * &z).norm();
            sampled = sampled.min(ratio);
        }
        // sampled minima can only approach the true margin from above
        assert!(sampled >= r.margin - 1e-6, "{sampled} vs {}", r.margin);
        assert!(sampled - r.margin < 0.05);
        assert!(r.snorm >= r.margin);
    }

    #[test]
    fn rank_one_margins_have_large_median() {
        let n = 200;
        let m = DMatrix::from_fn(n, 1, |i, _| ((i * i) as f64 * 0.01).cos());
        let mut margins: Vec<f64> = (0..200)
            .map(|t| {
                let s = SketchOperator::from_seed(20, n, derive_seed(4, t)).unwrap();
                embedding_margin(&s, &m, 0.5).unwrap().margin
            })
            .collect();
        margins.sort_by(f64::total_cmp);
        assert!(margins[100] >= 0.5, "median {}", margins[100]);
    }

    #[test]
    fn probability_estimates_at_the_extremes() {
        let n = 60;
        let g = DVector::from_fn(n, |i, _| (i as f64).sin());
        let m = taylor_matrix(&g, None);
        let always = estimate_true_probability(10, n, &m, 0.0, 100, 1).unwrap();
        assert_eq!(always.estimate, 1.0);

        let square = estimate_true_probability(n, n, &m, 0.01, 200, 2).unwrap();
        assert!(square.estimate > 0.95);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let full = DMatrix::from_fn(n, 10, |_, _| StandardNormal.sample(&mut rng));
        let hard = estimate_true_probability(10, n, &full, 0.9, 200, 3).unwrap();
        assert_eq!(hard.rank, 10);
        assert!(hard.estimate < 0.05);
        assert!(!hard.rank_condition_holds);
        assert!(hard.interval.0 <= hard.estimate && hard.estimate <= hard.interval.1);
    }

    #[test]
    fn probability_needs_enough_trials() {
        let m = DMatrix::from_element(5, 1, 1.0);
        assert!(estimate_true_probability(2, 5, &m, 0.5, 99, 0).is_err());
    }

    #[test]
    fn sparse_embedding_checker() {
        let s = SketchOperator::from_matrix(DMatrix::identity(2, 3));
        let g = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 5.0]));
        let r = check_sparse_embedding(&s, &g, &h, 1.0, 0.5, 0.5, 2.0).unwrap();
        assert_eq!(r.sh_norm, 0.0);
        assert!(r.passed);
        let h = DMatrix::identity(3, 3);
        let r = check_sparse_embedding(&s, &g, &h, 1.0, 0.5, 0.5, 2.0).unwrap();
        assert!(!r.passed);
    }

    proptest! {
        #[test]
        fn sampling_is_reproducible(rows in 1usize..8, extra in 0usize..8, seed in any::<u64>()) {
            let n = rows + extra;
            let a = SketchOperator::from_seed(rows, n, seed).unwrap();
            let b = SketchOperator::from_seed(rows, n, seed).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn norm_dominates_margin(rows in 2usize..6, seed in any::<u64>()) {
            let n = 12;
            let s = SketchOperator::from_seed(rows, n, seed).unwrap();
            let m = DMatrix::from_fn(n, 2, |i, j| ((i + 5 * j) as f64 + seed as f64 % 7.0).sin());
            let r = embedding_margin(&s, &m, 0.0).unwrap();
            prop_assert!(r.snorm >= r.margin - 1e-9);
        }
    }
}
