//! Shared estimators for binomial experiment outcomes.

/// Two-sided interval for a proportion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, p: f64) -> bool {
        self.low <= p && p <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Wilson score interval for `successes` out of `trials` at normal
/// quantile `z`. Stays inside [0, 1] and behaves sensibly at the
/// boundary counts, unlike the plain normal approximation.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> ConfidenceInterval {
    if trials == 0 {
        return ConfidenceInterval { low: 0.0, high: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let zz = z * z;
    let denom = 1.0 + zz / n;
    let center = (p + zz / (2.0 * n)) / denom;
    let half = z / denom * libm::sqrt(p * (1.0 - p) / n + zz / (4.0 * n * n));
    ConfidenceInterval {
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    }
}

/// The conventional 95% two-sided normal quantile.
pub const Z_95: f64 = 1.96;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_hand_computed_midpoint_case() {
        let ci = wilson_interval(50, 100, Z_95);
        assert!((ci.low - 0.4038).abs() < 1e-3, "{}", ci.low);
        assert!((ci.high - 0.5962).abs() < 1e-3, "{}", ci.high);
        assert!(ci.contains(0.5));
    }

    #[test]
    fn wilson_stays_in_unit_interval_at_boundaries() {
        let zero = wilson_interval(0, 200, Z_95);
        assert!(zero.low >= 0.0 && zero.low < 1e-9);
        assert!(zero.high > 0.0 && zero.high < 0.05);
        let full = wilson_interval(200, 200, Z_95);
        assert!(full.high <= 1.0 && full.high > 1.0 - 1e-9);
        assert!(full.low > 0.95);
        let empty = wilson_interval(0, 0, Z_95);
        assert_eq!(empty, ConfidenceInterval { low: 0.0, high: 1.0 });
    }

    #[test]
    fn wilson_narrows_with_more_trials() {
        let small = wilson_interval(10, 20, Z_95);
        let large = wilson_interval(1000, 2000, Z_95);
        assert!(large.width() < small.width());
    }
}
