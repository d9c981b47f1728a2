//! Overlapping Allan deviation with white-phase-noise confidence intervals,
//! and the SQL/HL instability references.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllanPoint {
    /// Averaging time, seconds.
    pub tau: f64,
    pub adev: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Equivalent chi-square degrees of freedom used for the interval.
    pub edf: f64,
}

/// Overlapping Allan deviation of the fractional-frequency series `y`
/// sampled every `tau0` seconds, at the requested averaging factors.
///
/// Confidence intervals assume white phase noise: the variance estimate is
/// treated as chi-square distributed with the standard overlapping-estimator
/// equivalent degrees of freedom for that noise type.
pub fn overlapping_allan(y: &[f64], tau0: f64, factors: &[usize], level: f64) -> Vec<AllanPoint> {
    assert!(tau0 > 0.0);
    assert!((0.0..1.0).contains(&level));
    // Integrate to phase data x (in seconds of time error).
    let mut x = Vec::with_capacity(y.len() + 1);
    x.push(0.0);
    let mut acc = 0.0;
    for &v in y {
        acc += v * tau0;
        x.push(acc);
    }
    let n_phase = x.len();

    factors
        .iter()
        .filter(|&&m| m >= 1 && 2 * m < n_phase)
        .map(|&m| {
            let terms = n_phase - 2 * m;
            let sum: f64 = (0..terms)
                .map(|i| {
                    let d = x[i + 2 * m] - 2.0 * x[i + m] + x[i];
                    d * d
                })
                .sum();
            let tau = m as f64 * tau0;
            let avar = sum / (2.0 * tau * tau * terms as f64);
            let adev = avar.sqrt();

            // White-PM equivalent degrees of freedom for the overlapping
            // estimator (standard approximation).
            let nf = n_phase as f64;
            let mf = m as f64;
            let edf = ((nf + 1.0) * (nf - 2.0 * mf) / (2.0 * (nf - mf))).max(1.0);
            let chi = ChiSquared::new(edf).unwrap();
            let hi_q = chi.inverse_cdf((1.0 + level) / 2.0);
            let lo_q = chi.inverse_cdf((1.0 - level) / 2.0);
            AllanPoint {
                tau,
                adev,
                ci_lower: (avar * edf / hi_q).sqrt(),
                ci_upper: (avar * edf / lo_q).sqrt(),
                edf,
            }
        })
        .collect()
}

/// Heisenberg-limit instability floor for `m` copies of `n`-atom GHZ states
/// with Ramsey dark time `t_dark`, and the standard quantum limit for the
/// same total atom number `m * n`. Both scale as `sqrt(t_cycle / tau)`.
pub fn sql_hl_reference(
    m: u32,
    n: u32,
    t_dark: f64,
    t_cycle: f64,
    nu0: f64,
    tau: f64,
) -> (f64, f64) {
    let hl = 1.0 / (2.0 * std::f64::consts::PI * nu0 * t_dark * (m as f64).sqrt() * n as f64)
        * (t_cycle / tau).sqrt();
    let sql = (n as f64).sqrt() * hl;
    (sql, hl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_series_has_zero_deviation() {
        let y = vec![3.25e-15; 512];
        let pts = overlapping_allan(&y, 1.0, &[1, 2, 4, 8], 0.68);
        for p in pts {
            assert_abs_diff_eq!(p.adev, 0.0, epsilon = 1e-30);
        }
    }

    // Oracle: an independent direct-sum implementation of the estimator
    // must agree identically on the same data.
    #[test]
    fn matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tau0 = 0.5;
        let pts = overlapping_allan(&y, tau0, &[1, 3, 7, 20], 0.68);
        for p in &pts {
            let m = (p.tau / tau0).round() as usize;
            // Direct frequency-average form: avar = <(ybar_{k+m} - ybar_k)^2>/2
            // over all overlapping windows.
            let count = y.len() - 2 * m + 1;
            let mut sum = 0.0;
            for k in 0..count {
                let a: f64 = y[k..k + m].iter().sum::<f64>() / m as f64;
                let b: f64 = y[k + m..k + 2 * m].iter().sum::<f64>() / m as f64;
                sum += (b - a) * (b - a);
            }
            let avar = sum / (2.0 * count as f64);
            assert_relative_eq!(p.adev, avar.sqrt(), max_relative = 1e-12);
        }
    }

    // White phase noise: x iid Gaussian with std sigma_x gives
    // adev(m tau0) = sqrt(3) sigma_x / (m tau0), slope -1.
    #[test]
    fn white_phase_noise_level_and_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sigma_x = 2.0e-9;
        let tau0 = 1.0;
        let normal = Normal::new(0.0, sigma_x).unwrap();
        let x: Vec<f64> = (0..200_001).map(|_| normal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]) / tau0).collect();
        let pts = overlapping_allan(&y, tau0, &[1, 2, 4, 8, 16], 0.68);
        for p in &pts {
            let expected = 3f64.sqrt() * sigma_x / p.tau;
            assert_relative_eq!(p.adev, expected, max_relative = 0.05);
            assert!(p.ci_lower <= p.adev && p.adev <= p.ci_upper);
        }
        let slope = (pts.last().unwrap().adev / pts[0].adev).ln()
            / (pts.last().unwrap().tau / pts[0].tau).ln();
        assert_relative_eq!(slope, -1.0, epsilon = 0.05);
    }

    #[test]
    fn linear_drift_grows_with_tau() {
        let rate = 1e-15; // per sample
        let y: Vec<f64> = (0..4096).map(|k| rate * k as f64).collect();
        let pts = overlapping_allan(&y, 1.0, &[2, 4, 8, 16, 32], 0.68);
        // adev = drift rate * tau / sqrt(2) for pure linear frequency drift.
        for p in &pts {
            assert_relative_eq!(p.adev, rate * p.tau / 2f64.sqrt(), max_relative = 0.05);
        }
        let slope = (pts.last().unwrap().adev / pts[0].adev).ln()
            / (pts.last().unwrap().tau / pts[0].tau).ln();
        assert_relative_eq!(slope, 1.0, epsilon = 0.02);
    }

    // Scale equivariance: adev(a * y) = a * adev(y).
    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..300).map(|_| rng.gen_range(-1e-14..1e-14)).collect();
        let scaled: Vec<f64> = y.iter().map(|v| 7.5 * v).collect();
        let a = overlapping_allan(&y, 2.0, &[1, 5, 11], 0.68);
        let b = overlapping_allan(&scaled, 2.0, &[1, 5, 11], 0.68);
        for (pa, pb) in a.iter().zip(&b) {
            assert_relative_eq!(pb.adev, 7.5 * pa.adev, max_relative = 1e-12);
        }
    }

    #[test]
    fn sql_hl_reference_values() {
        // Direct substitution with the experiment-scale parameters.
        let (sql, hl) = sql_hl_reference(9, 4, 3e-3, 1.26, 429_228_066_418_012.0, 1.0);
        assert_relative_eq!(hl, 1.156_151_618_553_593e-14, max_relative = 1e-12);
        assert_relative_eq!(sql, 2.0 * hl, max_relative = 1e-12);

        // sqrt(N) relation and scalings.
        for (m, n) in [(3u32, 2u32), (5, 8), (1, 1)] {
            let (sql, hl) = sql_hl_reference(m, n, 1e-3, 1.0, 4e14, 2.0);
            assert_relative_eq!(sql, (n as f64).sqrt() * hl, max_relative = 1e-12);
            let (sql_t, hl_t) = sql_hl_reference(m, n, 2e-3, 1.0, 4e14, 2.0);
            assert_relative_eq!(hl_t, hl / 2.0, max_relative = 1e-12);
            assert_relative_eq!(sql_t, sql / 2.0, max_relative = 1e-12);
        }
    }
}
