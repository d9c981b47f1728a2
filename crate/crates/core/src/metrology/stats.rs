//! Small statistics helpers shared by the analysis code.

use statrs::distribution::{Beta, ContinuousCDF};

/// Clopper-Pearson confidence interval for a binomial proportion at the
/// given two-sided confidence level (default use: 0.68).
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(successes <= trials && trials > 0);
    assert!((0.0..1.0).contains(&level));
    let alpha = 1.0 - level;
    let k = successes as f64;
    let n = trials as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Symmetric standard error proxy from a Clopper-Pearson interval.
pub fn proportion_sigma(successes: u64, trials: u64) -> f64 {
    let (lo, hi) = clopper_pearson(successes, trials, 0.68);
    ((hi - lo) / 2.0).max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn boundary_cases() {
        let (lo, _) = clopper_pearson(0, 10, 0.68);
        assert_eq!(lo, 0.0);
        let (_, hi) = clopper_pearson(10, 10, 0.68);
        assert_eq!(hi, 1.0);
    }

    // Oracle: beta-quantile reference values computed independently.
    #[test]
    fn reference_values() {
        let (lo, hi) = clopper_pearson(5, 10, 0.68);
        assert_abs_diff_eq!(lo, 0.305_577_576_823_308_77, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 0.694_422_423_176_691_2, epsilon = 1e-9);
        let (_, hi0) = clopper_pearson(0, 10, 0.68);
        assert_abs_diff_eq!(hi0, 0.167_446_792_598_126_92, epsilon = 1e-9);
        let (lo10, _) = clopper_pearson(10, 10, 0.68);
        assert_abs_diff_eq!(lo10, 0.832_553_207_401_873_1, epsilon = 1e-9);
    }

    #[test]
    fn interval_contains_point_estimate() {
        for k in 0..=20 {
            let (lo, hi) = clopper_pearson(k, 20, 0.68);
            let p = k as f64 / 20.0;
            assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
        }
    }
}
