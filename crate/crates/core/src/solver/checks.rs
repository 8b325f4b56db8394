//! Checks of the algorithm's guarantees against recorded traces.

use super::trace::RunTrace;
use super::update_nu;
use crate::subproblem::factorial;

/// Relative slack allowed on the gradient-step inequality when rechecking
/// recorded traces.
pub const GRADSTEP_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecurrenceReport {
    pub steps: usize,
    /// `ν_{k+1} ≤ ν_k` after a step whose increment `ν_k ‖s_k‖^{p+1}` is
    /// representable; shorter nonzero steps leave `ν` unchanged in floating
    /// point.
    pub nu_not_increasing: usize,
    /// `ν_{k+1}` differs from `ν_k (1 + ‖s_k‖^{p+1})`.
    pub nu_mismatches: usize,
    pub mu_decreases: usize,
    /// `σ_k ∉ [ϑν_k, max(ν_k, μ_k)]`.
    pub sigma_outside: usize,
}

impl RecurrenceReport {
    pub fn passed(&self) -> bool {
        self.nu_not_increasing == 0
            && self.nu_mismatches == 0
            && self.mu_decreases == 0
            && self.sigma_outside == 0
    }
}

pub fn check_recurrences(trace: &RunTrace, vartheta: f64) -> RecurrenceReport {
    let mut rep = RecurrenceReport::default();
    for w in trace.records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if !a.is_step() {
            continue;
        }
        rep.steps += 1;
        let increment = a.nu * a.snorm.powi(trace.p as i32 + 1);
        if a.nu + increment > a.nu && !(b.nu > a.nu) {
            rep.nu_not_increasing += 1;
        }
        if b.nu != update_nu(a.nu, a.snorm, trace.p) {
            rep.nu_mismatches += 1;
        }
        if b.mu < a.mu {
            rep.mu_decreases += 1;
        }
        if !(a.sigma >= vartheta * a.nu && a.sigma <= a.nu.max(a.mu)) {
            rep.sigma_outside += 1;
        }
    }
    rep
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionReport {
    pub steps: usize,
    pub descent_failures: usize,
    pub gradstep_failures: usize,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.descent_failures == 0 && self.gradstep_failures == 0
    }
}

/// Descent (`m̂` decrease strictly positive) and the gradient-step
/// inequality with relative slack [`GRADSTEP_RTOL`], from recorded values.
pub fn check_conditions(trace: &RunTrace) -> ConditionReport {
    let mut rep = ConditionReport::default();
    for r in trace.steps() {
        rep.steps += 1;
        if !(r.model_decrease > 0.0) {
            rep.descent_failures += 1;
        }
        if !(r.gs_lhs <= r.gs_rhs * (1.0 + GRADSTEP_RTOL)) {
            rep.gradstep_failures += 1;
        }
    }
    rep
}

/// Number of steps violating `T(0) − T(s_k) > σ_k/(p+1)! ‖s_k‖^{p+1}`.
pub fn check_taylor_decrease(trace: &RunTrace) -> usize {
    let p = trace.p;
    trace
        .steps()
        .filter(|r| !(r.taylor_decrease > r.sigma / factorial(p + 1) * r.snorm.powi(p as i32 + 1)))
        .count()
}

/// Number of recorded `μ_k` above `max(μ₋₁, L_p) + 1e-10`.
pub fn check_mu_bound(trace: &RunTrace, mu_init: f64, lipschitz: f64) -> usize {
    let bound = mu_init.max(lipschitz) + 1e-10;
    trace.records.iter().filter(|r| r.mu > bound).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaReport {
    pub flags: Vec<bool>,
    /// Number of ω-true iterations.
    pub count: usize,
}

/// Flags steps with `‖s_k‖^p ≥ ωε`.
pub fn omega_true_flags(trace: &RunTrace, omega: f64, eps: f64) -> OmegaReport {
    let flags: Vec<bool> = trace
        .steps()
        .map(|r| r.snorm.powi(trace.p as i32) >= omega * eps)
        .collect();
    let count = flags.iter().filter(|&&f| f).count();
    OmegaReport { flags, count }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepBoundReport {
    pub eta: f64,
    pub violations: usize,
    /// Largest `‖s_k‖ / bound_k` seen.
    pub worst_ratio: f64,
}

/// `η = Σ_{i=2}^{p} [κ_high (p+1)! / (i! ϑ ν₀)]^{1/(p−i+1)}`
pub fn step_bound_eta(kappa_high: f64, nu0: f64, vartheta: f64, p: usize) -> f64 {
    (2..=p)
        .map(|i| {
            (kappa_high * factorial(p + 1) / (factorial(i) * vartheta * nu0))
                .powf(1.0 / (p - i + 1) as f64)
        })
        .sum()
}

/// Checks `‖s_k‖ ≤ 2η + 2((p+1)! ‖g_k‖ / σ_k)^{1/p}` on every step.
pub fn check_step_bound(trace: &RunTrace, kappa_high: f64, nu0: f64, vartheta: f64, p: usize) -> StepBoundReport {
    let eta = step_bound_eta(kappa_high, nu0, vartheta, p);
    bound_report(trace, eta, |r| {
        2.0 * eta + 2.0 * (factorial(p + 1) * r.gnorm / r.sigma).powf(1.0 / p as f64)
    })
}

/// Checks `‖s_k‖ ≤ 2‖g_k‖ / (ϑν₀)` for the quadratically regularised
/// variant.
pub fn check_step_bound_2b(trace: &RunTrace, nu0: f64, vartheta: f64) -> StepBoundReport {
    bound_report(trace, 0.0, |r| 2.0 * r.gnorm / (vartheta * nu0))
}

fn bound_report(
    trace: &RunTrace,
    eta: f64,
    bound: impl Fn(&super::trace::IterationRecord) -> f64,
) -> StepBoundReport {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for r in trace.steps() {
        let b = bound(r);
        if r.snorm > b {
            violations += 1;
        }
        worst = worst.max(r.snorm / b);
    }
    StepBoundReport {
        eta,
        violations,
        worst_ratio: worst,
    }
}
