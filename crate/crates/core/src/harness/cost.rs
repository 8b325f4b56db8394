//! Per-iteration evaluation cost of a sketched second-order iteration,
//! relative to one full gradient (`w₁`) or one full gradient plus Hessian
//! (`w₂`).

/// `w₁(τ, n) = τ + nτ²`
pub fn w1(tau: f64, n: usize) -> f64 {
    tau + n as f64 * tau * tau
}

/// `w₂(τ, n) = (τ + nτ²) / (1 + n)`
pub fn w2(tau: f64, n: usize) -> f64 {
    w1(tau, n) / (1.0 + n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn full_space_costs() {
        for n in [1, 2, 200, 10_000] {
            assert_eq!(w2(1.0, n), 1.0);
            assert_eq!(w1(1.0, n), 1.0 + n as f64);
        }
    }

    #[test]
    fn reference_values() {
        assert_relative_eq!(w2(0.1, 10_000), 100.1 / 10_001.0, max_relative = 1e-15);
        assert_relative_eq!(w2(0.1, 10_000), 1.000_90e-2, max_relative = 1e-5);
        for (tau, n) in [(0.3, 7), (0.01, 200), (0.05, 1000)] {
            assert_relative_eq!(w1(tau, n), (1.0 + n as f64) * w2(tau, n), max_relative = 1e-15);
        }
    }

    #[test]
    fn tables_are_related_by_one_plus_n() {
        // 0.1191 × 10001 ≈ 1191
        assert!((0.1191 * 10_001.0 - 1191.0f64).abs() < 1.0);
    }
}
