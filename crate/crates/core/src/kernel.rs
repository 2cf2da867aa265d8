//! Geometric excitation kernel `g(n) = β(1−β)^(n−1)` and its cumulative mass.

use crate::error::{HawkesError, Result};

/// Above this exponent powers of `1−β` are evaluated in log space.
const DIRECT_POWER_LIMIT: i64 = 1_000;

/// `(1−β)^n` for any integer `n` (negative exponents included).
#[inline]
pub fn decay(beta: f64, n: i64) -> f64 {
    if n.abs() <= DIRECT_POWER_LIMIT {
        (1.0 - beta).powi(n as i32)
    } else {
        (n as f64 * (-beta).ln_1p()).exp()
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(HawkesError::InvalidParameter(format!(
            "beta must lie in (0, 1), got {beta}"
        )))
    }
}

/// Probability mass `β(1−β)^(n−1)` of the geometric kernel at lag `n ≥ 1`.
pub fn geometric_pmf(beta: f64, n: i64) -> Result<f64> {
    check_beta(beta)?;
    if n < 1 {
        return Err(HawkesError::InvalidParameter(format!(
            "kernel lag must be at least 1, got {n}"
        )));
    }
    Ok(beta * decay(beta, n - 1))
}

/// Cumulative mass `1 − (1−β)^n`, zero at `n = 0`.
pub fn geometric_cdf(beta: f64, n: u64) -> Result<f64> {
    check_beta(beta)?;
    Ok(cdf_unchecked(beta, n as i64))
}

#[inline]
pub(crate) fn cdf_unchecked(beta: f64, n: i64) -> f64 {
    -(n as f64 * (-beta).ln_1p()).exp_m1()
}

/// `∂/∂β` of the cumulative mass: `n(1−β)^(n−1)`.
#[inline]
pub(crate) fn cdf_dbeta(beta: f64, n: i64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * decay(beta, n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pmf_values() {
        assert_eq!(geometric_pmf(0.5, 1).unwrap(), 0.5);
        assert_eq!(geometric_pmf(0.5, 2).unwrap(), 0.25);
        assert_relative_eq!(geometric_pmf(0.2, 3).unwrap(), 0.2 * 0.8 * 0.8, max_relative = 1e-15);
        assert_relative_eq!(geometric_pmf(0.2, 3).unwrap(), 0.128, max_relative = 1e-12);
    }

    #[test]
    fn pmf_rejects_bad_input() {
        assert!(geometric_pmf(0.0, 1).is_err());
        assert!(geometric_pmf(1.0, 1).is_err());
        assert!(geometric_pmf(0.5, 0).is_err());
        assert!(geometric_cdf(-0.1, 3).is_err());
    }

    #[test]
    fn cdf_values() {
        assert_eq!(geometric_cdf(0.5, 0).unwrap(), 0.0);
        assert_relative_eq!(geometric_cdf(0.5, 2).unwrap(), 0.75, max_relative = 1e-15);
        for k in 0..=50u64 {
            let partial: f64 = (1..=k as i64).map(|n| geometric_pmf(0.5, n).unwrap()).sum();
            assert!((partial - geometric_cdf(0.5, k).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn log_space_branch_is_continuous() {
        let b: f64 = 0.003;
        let direct = (1.0 - b).powi(1001);
        assert_relative_eq!(decay(b, 1001), direct, max_relative = 1e-12);
        assert!(decay(0.5, 100_000) >= 0.0);
    }

    #[test]
    fn negative_exponent() {
        assert_relative_eq!(decay(0.25, -1), 1.0 / 0.75, max_relative = 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn pmf_partial_sums_match_cdf(beta in 0.001f64..0.999, n in 0u64..1000) {
            let partial: f64 = (1..=n as i64).map(|k| geometric_pmf(beta, k).unwrap()).sum();
            proptest::prop_assert!((partial - geometric_cdf(beta, n).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn cdf_monotone(beta in 0.001f64..0.999, n in 0u64..5000) {
            proptest::prop_assert!(geometric_cdf(beta, n + 1).unwrap() >= geometric_cdf(beta, n).unwrap());
        }
    }
}
