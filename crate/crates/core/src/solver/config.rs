use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::harness::cost;
use crate::sketch::kappa_bound;
use crate::subproblem::SolveMode;
use crate::{Error, Result};

pub const MAX_ITER_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Taylor model of degree `p` with `‖s‖^{p+1}` regularisation.
    #[default]
    SkoffarP,
    /// Quadratic model with a PSD matrix `B_k` and `‖s‖²` regularisation.
    Skoffar2B,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "skoffar_p" | "skoffarp" | "p" => Ok(Self::SkoffarP),
            "skoffar_2b" | "skoffar2b" | "2b" => Ok(Self::Skoffar2B),
            _ => Err(Error::InvalidArgument(format!("unknown variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiRule {
    Constant(f64),
    /// Heuristic: double `ξ` after a gradient-norm decrease, halve it
    /// otherwise, clamped to `[1e-6, 1]`.
    Doubling { initial: f64 },
}

impl Default for XiRule {
    fn default() -> Self {
        Self::Constant(0.05)
    }
}

impl XiRule {
    pub fn initial(&self) -> f64 {
        match *self {
            Self::Constant(x) | Self::Doubling { initial: x } => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaMode {
    /// `κ_S = 1.5 + √(n/ℓ)`.
    #[default]
    BetaBound,
    /// `κ_S = ‖S‖₂` by power iteration.
    ExactNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaRule {
    /// `σ_k = ν_k`.
    Theory,
    /// `σ_k = max(ϑν_k, ξ_k μ_k)`.
    #[default]
    Practical,
}

/// User-supplied `B(x) v`, assumed symmetric positive semidefinite.
pub type BOperator = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Clone, Default)]
pub enum BMode {
    Zero,
    /// `B = 2JᵀJ` for `f = Σ r_i²`.
    #[default]
    GaussNewton,
    User(BOperator),
}

impl fmt::Debug for BMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::GaussNewton => f.write_str("GaussNewton"),
            Self::User(_) => f.write_str("User(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SketchKind {
    /// Scaled Gaussian `N(0, 1/ℓ)` entries.
    #[default]
    Gaussian,
    /// `S_k = I`: the full-space method.
    Identity,
}

/// Deliberate defects used to show that the invariant checks bite.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// `ν_{k+1} = ν_k`.
    FreezeNu,
    /// Evaluates the objective once per iteration.
    QueryObjective,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Model degree, 1 or 2. Ignored by the 2B variant.
    pub p: usize,
    /// `ℓ/n`.
    pub tau: f64,
    pub eps: f64,
    pub nu0: f64,
    pub vartheta: f64,
    /// `None` selects `1.01 (1 + √(n/ℓ))`.
    pub theta: Option<f64>,
    pub mu_init: f64,
    pub xi_rule: XiRule,
    pub kappa_mode: KappaMode,
    pub sigma_rule: SigmaRule,
    /// `None` selects `⌈10⁵ / w₂(τ, n)⌉`, capped at `10⁷`.
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub variant: Variant,
    pub b_mode: BMode,
    pub solve_mode: SolveMode,
    pub sketch: SketchKind,
    /// Record `f(x_k)` in the trace. Off by default.
    pub diagnostics: bool,
    pub max_redraws: usize,
    #[doc(hidden)]
    pub fault: Fault,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 2,
            tau: 1.0,
            eps: 1e-3,
            nu0: 1.0,
            vartheta: 1e-3,
            theta: None,
            mu_init: 1e3,
            xi_rule: XiRule::default(),
            kappa_mode: KappaMode::default(),
            sigma_rule: SigmaRule::default(),
            max_iter: None,
            seed: 0,
            variant: Variant::default(),
            b_mode: BMode::default(),
            solve_mode: SolveMode::default(),
            sketch: SketchKind::default(),
            diagnostics: false,
            max_redraws: 5,
            fault: Fault::None,
        }
    }
}

/// Default `ν₀` for degree `p`.
pub fn default_nu0(p: usize) -> f64 {
    if p == 1 {
        100.0
    } else {
        1.0
    }
}

impl SolverConfig {
    /// Defaults for degree `p`. With `p = 1` the first step is `−g₀/ν₀`, so
    /// `ν₀` starts at 100 rather than 1 to keep that step from overshooting.
    pub fn skoffar(p: usize, tau: f64, seed: u64) -> Self {
        Self {
            p,
            nu0: default_nu0(p),
            tau,
            seed,
            ..Self::default()
        }
    }

    pub fn skoffar_2b(tau: f64, seed: u64) -> Self {
        Self {
            variant: Variant::Skoffar2B,
            tau,
            seed,
            ..Self::default()
        }
    }

    /// Degree that enters the `μ` and `ν` recurrences: `p`, or 1 for 2B.
    pub fn recurrence_degree(&self) -> usize {
        match self.variant {
            Variant::SkoffarP => self.p,
            Variant::Skoffar2B => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.variant, self.p) {
            (Variant::Skoffar2B, _) => "skoffar2b",
            (Variant::SkoffarP, 1) => "skoffar1",
            _ => "skoffar2",
        }
    }

    /// `ℓ = max(1, round(τ n))`; the identity sketch always has `ℓ = n`.
    pub fn rows(&self, n: usize) -> usize {
        match self.sketch {
            SketchKind::Identity => n,
            SketchKind::Gaussian => ((self.tau * n as f64).round() as usize).clamp(1, n),
        }
    }

    /// Effective `τ = ℓ/n`.
    pub fn effective_tau(&self, n: usize) -> f64 {
        self.rows(n) as f64 / n as f64
    }

    pub fn theta_for(&self, n: usize) -> f64 {
        self.theta
            .unwrap_or_else(|| 1.01 * (1.0 + (n as f64 / self.rows(n) as f64).sqrt()))
    }

    pub fn kappa_bound_for(&self, n: usize) -> f64 {
        kappa_bound(self.rows(n), n)
    }

    /// Iteration cost weights `(w₁, w₂)` for this configuration.
    ///
    /// A first-order iteration only needs the sketched gradient, so `p = 1`
    /// is charged `τ` gradient equivalents.
    pub fn cost_weights(&self, n: usize) -> (f64, f64) {
        let tau = self.effective_tau(n);
        if self.variant == Variant::SkoffarP && self.p == 1 {
            (tau, tau / (1.0 + n as f64))
        } else {
            (cost::w1(tau, n), cost::w2(tau, n))
        }
    }

    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| {
            let w2 = self.cost_weights(n).1;
            let budget = (1e5 / w2).ceil();
            if budget >= MAX_ITER_CAP as f64 {
                MAX_ITER_CAP
            } else {
                budget as usize
            }
        })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.variant == Variant::SkoffarP && !(self.p == 1 || self.p == 2) {
            return bad(format!("p must be 1 or 2, got {}", self.p));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.nu0 > 0.0) || !self.nu0.is_finite() {
            return bad(format!("nu0 must be positive, got {}", self.nu0));
        }
        if !(self.vartheta > 0.0 && self.vartheta < 1.0) {
            return bad(format!("vartheta must lie in (0, 1), got {}", self.vartheta));
        }
        if let Some(t) = self.theta {
            if !(t > 1.0) {
                return bad(format!("theta must exceed 1, got {t}"));
            }
        }
        if !(self.mu_init >= 0.0) || !self.mu_init.is_finite() {
            return bad(format!("mu_init must be nonnegative, got {}", self.mu_init));
        }
        let xi = self.xi_rule.initial();
        if !(xi > 0.0 && xi <= 1.0) {
            return bad(format!("xi must lie in (0, 1], got {xi}"));
        }
        if n == 0 {
            return bad("problem dimension is zero".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = SolverConfig::default();
        c.validate(10).unwrap();
        assert_eq!(c.name(), "skoffar2");
        assert_eq!(SolverConfig::skoffar(1, 1.0, 0).name(), "skoffar1");
        assert_eq!(SolverConfig::skoffar_2b(1.0, 0).name(), "skoffar2b");
    }

    #[test]
    fn rows_and_theta() {
        let c = SolverConfig::skoffar(2, 0.1, 0);
        assert_eq!(c.rows(200), 20);
        assert!((c.theta_for(200) - 1.01 * (1.0 + 10f64.sqrt())).abs() < 1e-15);
        assert_eq!(SolverConfig::skoffar(2, 1e-4, 0).rows(200), 1);
        let mut id = c.clone();
        id.sketch = SketchKind::Identity;
        assert_eq!(id.rows(7), 7);
        assert!((id.theta_for(7) - 2.02).abs() < 1e-15);
    }

    #[test]
    fn iteration_budget() {
        let c = SolverConfig::skoffar(2, 1.0, 0);
        assert_eq!(c.max_iter_for(200), 100_000);
        let small = SolverConfig::skoffar(2, 0.01, 0);
        assert_eq!(small.max_iter_for(200), MAX_ITER_CAP);
        let tenth = SolverConfig::skoffar(2, 0.1, 0);
        let w2 = cost::w2(0.1, 200);
        assert_eq!(tenth.max_iter_for(200), (1e5 / w2).ceil() as usize);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let base = SolverConfig::default();
        let cases: Vec<SolverConfig> = vec![
            SolverConfig { p: 3, ..base.clone() },
            SolverConfig { tau: 0.0, ..base.clone() },
            SolverConfig { tau: 1.5, ..base.clone() },
            SolverConfig { eps: 0.0, ..base.clone() },
            SolverConfig { nu0: 0.0, ..base.clone() },
            SolverConfig { vartheta: 1.0, ..base.clone() },
            SolverConfig { theta: Some(1.0), ..base.clone() },
            SolverConfig { mu_init: -1.0, ..base.clone() },
            SolverConfig { xi_rule: XiRule::Constant(1.5), ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate(10).is_err(), "{c:?}");
        }
    }

    #[test]
    fn variant_names_parse() {
        assert_eq!(Variant::parse("skoffar_p").unwrap(), Variant::SkoffarP);
        assert_eq!(Variant::parse("skoffar_2b").unwrap(), Variant::Skoffar2B);
        assert!(Variant::parse("adam").is_err());
    }
}
