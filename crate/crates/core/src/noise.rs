//! Stochastic noise parameters and the analytic decay models attached to
//! them: Raman repopulation of the ground state and GHZ coherence decay
//! under correlated dephasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Raman scattering rates between ground (0), clock (1) and the metastable
/// reservoir state (2), in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanRates {
    pub gamma_1_to_0: f64,
    pub gamma_1_to_2: f64,
    pub gamma_2_to_0: f64,
}

impl Default for RamanRates {
    fn default() -> Self {
        Self {
            gamma_1_to_0: crate::constants::RAMAN_1_TO_0_HZ,
            gamma_1_to_2: crate::constants::RAMAN_1_TO_2_HZ,
            gamma_2_to_0: crate::constants::RAMAN_2_TO_0_HZ,
        }
    }
}

/// Stochastic error model for the GHZ preparation experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Fractional shot-to-shot standard deviation of the Rydberg Rabi frequency.
    pub sigma_rabi_frac: f64,
    /// Shot-to-shot standard deviation of the Rydberg detuning, rad/s.
    pub sigma_detuning: f64,
    /// When true, detuning fluctuates independently per atom instead of one
    /// global draw per shot.
    pub detuning_per_atom: bool,
    /// Rydberg decay rate into detection-dark states, 1/s.
    pub gamma_dark: f64,
    /// Rydberg decay rate into detection-bright states, 1/s.
    pub gamma_bright: f64,
    pub raman: RamanRates,
    /// Whether lattice Raman scattering is applied as end-of-sequence
    /// Bernoulli leak events.
    pub raman_enabled: bool,
    /// Per-shot atom survival probability of the lattice release/recapture
    /// (1.0 disables recapture loss).
    pub recapture_survival: f64,
    /// Time the clock state is exposed to Raman scattering, seconds.
    pub sequence_time: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_rabi_frac: crate::constants::SIGMA_RABI_FRAC,
            sigma_detuning: crate::constants::SIGMA_DETUNING_RAD,
            detuning_per_atom: false,
            gamma_dark: 1.0 / crate::constants::RYDBERG_DARK_LIFETIME_S,
            gamma_bright: 1.0 / crate::constants::RYDBERG_BRIGHT_LIFETIME_S,
            raman: RamanRates::default(),
            raman_enabled: true,
            recapture_survival: 1.0,
            sequence_time: 30e-3,
        }
    }
}

impl NoiseConfig {
    /// All noise channels off.
    pub fn ideal() -> Self {
        Self {
            sigma_rabi_frac: 0.0,
            sigma_detuning: 0.0,
            detuning_per_atom: false,
            gamma_dark: 0.0,
            gamma_bright: 0.0,
            raman: RamanRates { gamma_1_to_0: 0.0, gamma_1_to_2: 0.0, gamma_2_to_0: 0.0 },
            raman_enabled: false,
            recapture_survival: 1.0,
            sequence_time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let nonneg = [
            self.sigma_detuning,
            self.gamma_dark,
            self.gamma_bright,
            self.raman.gamma_1_to_0,
            self.raman.gamma_1_to_2,
            self.raman.gamma_2_to_0,
            self.sequence_time,
        ];
        if nonneg.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err("noise rates must be finite and nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.sigma_rabi_frac) {
            return Err("sigma_rabi_frac must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.recapture_survival) {
            return Err("recapture_survival must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn gamma_total(&self) -> f64 {
        self.gamma_dark + self.gamma_bright
    }
}

/// Populations of (ground, clock, reservoir) after time `t`, starting from
/// the clock state. Closed-form solution of the linear rate equations:
/// the clock population decays as a single exponential and the reservoir
/// follows a two-exponential law; the ground state takes up the rest.
pub fn raman_populations(t: f64, rates: &RamanRates) -> (f64, f64, f64) {
    raman_populations_from(t, rates, (0.0, 1.0, 0.0))
}

pub fn raman_populations_from(t: f64, rates: &RamanRates, initial: (f64, f64, f64)) -> (f64, f64, f64) {
    assert!(t >= 0.0);
    let (p0_init, p1_init, p2_init) = initial;
    let total = p0_init + p1_init + p2_init;
    let a = rates.gamma_1_to_0 + rates.gamma_1_to_2;
    let g20 = rates.gamma_2_to_0;
    let p1 = p1_init * (-a * t).exp();
    let feed = if (g20 - a).abs() > 1e-12 * (g20 + a).max(1e-300) {
        rates.gamma_1_to_2 * p1_init * ((-a * t).exp() - (-g20 * t).exp()) / (g20 - a)
    } else {
        rates.gamma_1_to_2 * p1_init * t * (-a * t).exp()
    };
    let p2 = p2_init * (-g20 * t).exp() + feed;
    (total - p1 - p2, p1, p2)
}

/// Analytic parity contrast of an `n`-atom GHZ state after hold time `t`
/// under correlated Gaussian dephasing with single-atom 1/e time `t1`.
pub fn coherence_contrast_analytic(n: u32, t1: f64, t: f64) -> f64 {
    let x = n as f64 * t / t1;
    (-x * x).exp()
}

/// Monte Carlo contrast curve: one global Gaussian detuning draw per shot,
/// constant over the dark time, as appropriate for slow inhomogeneous
/// broadening. Returns the contrast estimate per grid point.
pub fn simulate_coherence_decay(n: u32, t1: f64, t_grid: &[f64], draws: usize, seed: u64) -> Vec<f64> {
    assert!(t1 > 0.0 && draws > 0);
    // Single-atom 1/e time t1 corresponds to a detuning spread sqrt(2)/t1.
    let sigma = 2f64.sqrt() / t1;
    let normal = Normal::new(0.0, sigma).unwrap();
    t_grid
        .iter()
        .map(|&t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((t.to_bits() & 0xffff_ffff) ^ 0x5eed);
            let mut acc = 0.0;
            for _ in 0..draws {
                let delta = normal.sample(&mut rng);
                acc += (n as f64 * delta * t).cos();
            }
            acc / draws as f64
        })
        .collect()
}

/// Fit a Gaussian 1/e decay time to a contrast curve by linear regression of
/// `-ln C` against `t^2`; points with `C <= 0.05` are dropped.
pub fn fit_gaussian_decay_time(t_grid: &[f64], contrast: &[f64]) -> Option<f64> {
    assert_eq!(t_grid.len(), contrast.len());
    let pts: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(contrast)
        .filter(|(_, &c)| c > 0.05)
        .map(|(&t, &c)| (t * t, -c.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    if sxx <= 0.0 || sxy <= 0.0 {
        return None;
    }
    // Through-origin fit: slope = 1/tau^2.
    Some((sxx / sxy).sqrt())
}

/// Independent per-atom outcome flips used to model end-of-sequence Raman
/// leak events: an atom in the clock state is rerouted to dark with
/// probability `p(1->0)` (pushed out before imaging) or flagged as a bright
/// leak with probability `p(1->2)` (repumped into the imaged ground state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamanLeakProbabilities {
    pub to_dark: f64,
    pub to_bright_leak: f64,
}

pub fn raman_leak_probabilities(cfg: &NoiseConfig) -> RamanLeakProbabilities {
    if !cfg.raman_enabled || cfg.sequence_time <= 0.0 {
        return RamanLeakProbabilities { to_dark: 0.0, to_bright_leak: 0.0 };
    }
    let (_, p1, p2) = raman_populations(cfg.sequence_time, &cfg.raman);
    let decayed = 1.0 - p1;
    // Population that reached the ground state reads dark; population parked
    // in the reservoir is repumped and still reads bright.
    RamanLeakProbabilities { to_dark: decayed - p2, to_bright_leak: p2 }
}

/// Draw a Gaussian with the shot-reproducible stream convention used across
/// the crate: stream = shot index, seed = experiment seed.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// Gaussian draw helper for (rabi, detuning) fluctuations.
pub fn draw_rabi_detuning(cfg: &NoiseConfig, nominal_rabi: f64, rng: &mut impl Rng) -> (f64, f64) {
    let rabi = if cfg.sigma_rabi_frac > 0.0 {
        let normal = Normal::new(1.0, cfg.sigma_rabi_frac).unwrap();
        nominal_rabi * normal.sample(rng)
    } else {
        nominal_rabi
    };
    let detuning = if cfg.sigma_detuning > 0.0 {
        Normal::new(0.0, cfg.sigma_detuning).unwrap().sample(rng)
    } else {
        0.0
    };
    (rabi, detuning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn raman_initial_condition() {
        let rates = RamanRates::default();
        assert_eq!(raman_populations(0.0, &rates), (0.0, 1.0, 0.0));
    }

    // The decoupled clock-state equation integrates to a pure exponential:
    // p1(1 s) = exp(-0.74) with the fitted rates.
    #[test]
    fn clock_population_closed_form() {
        let rates = RamanRates::default();
        let (_, p1, _) = raman_populations(1.0, &rates);
        assert_abs_diff_eq!(p1, 0.477_113_915_521_034_4, epsilon = 1e-12);
    }

    #[test]
    fn populations_conserved() {
        let rates = RamanRates::default();
        for &t in &[0.0, 0.1, 1.0, 5.0, 50.0] {
            let (p0, p1, p2) = raman_populations(t, &rates);
            assert_abs_diff_eq!(p0 + p1 + p2, 1.0, epsilon = 1e-12);
            assert!(p0 >= 0.0 && p1 >= 0.0 && p2 >= 0.0);
        }
    }

    // Oracle: RK4 integration of the rate equations.
    #[test]
    fn closed_form_matches_numeric_integration() {
        let rates = RamanRates::default();
        let t_end = 3.0;
        let steps = 3000;
        let h = t_end / steps as f64;
        let mut p = [0.0, 1.0, 0.0];
        let deriv = |p: &[f64; 3]| {
            [
                rates.gamma_1_to_0 * p[1] + rates.gamma_2_to_0 * p[2],
                -(rates.gamma_1_to_0 + rates.gamma_1_to_2) * p[1],
                rates.gamma_1_to_2 * p[1] - rates.gamma_2_to_0 * p[2],
            ]
        };
        for _ in 0..steps {
            let k1 = deriv(&p);
            let p2v = [p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1], p[2] + 0.5 * h * k1[2]];
            let k2 = deriv(&p2v);
            let p3 = [p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1], p[2] + 0.5 * h * k2[2]];
            let k3 = deriv(&p3);
            let p4 = [p[0] + h * k3[0], p[1] + h * k3[1], p[2] + h * k3[2]];
            let k4 = deriv(&p4);
            for i in 0..3 {
                p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let (p0, p1, p2) = raman_populations(t_end, &rates);
        assert_abs_diff_eq!(p0, p[0], epsilon = 1e-9);
        assert_abs_diff_eq!(p1, p[1], epsilon = 1e-9);
        assert_abs_diff_eq!(p2, p[2], epsilon = 1e-9);
    }

    #[test]
    fn degenerate_rates_use_limit_form() {
        let rates = RamanRates { gamma_1_to_0: 0.3, gamma_1_to_2: 0.2, gamma_2_to_0: 0.5 };
        // gamma_2_to_0 equals gamma_1_to_0 + gamma_1_to_2 here.
        let (p0, p1, p2) = raman_populations(2.0, &rates);
        assert_abs_diff_eq!(p0 + p1 + p2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p2, 0.2 * 2.0 * (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn single_atom_coherence_time_recovered() {
        let t1 = 0.327;
        let grid: Vec<f64> = (1..=12).map(|k| k as f64 * 0.05 * t1).collect();
        let contrast = simulate_coherence_decay(1, t1, &grid, 40_000, 9);
        let fitted = fit_gaussian_decay_time(&grid, &contrast).unwrap();
        assert_relative_eq!(fitted, t1, max_relative = 0.05);
    }

    #[test]
    fn ghz_coherence_scales_inversely_with_size() {
        let t1 = 0.327;
        for n in [2u32, 4] {
            let expected = t1 / n as f64;
            let grid: Vec<f64> = (1..=12).map(|k| k as f64 * 0.05 * expected).collect();
            let contrast = simulate_coherence_decay(n, t1, &grid, 40_000, 10);
            let fitted = fit_gaussian_decay_time(&grid, &contrast).unwrap();
            assert_relative_eq!(fitted, expected, max_relative = 0.05, epsilon = 1e-6);
        }
        // Doubling N halves the fitted time.
        let grid2: Vec<f64> = (1..=12).map(|k| k as f64 * 0.05 * t1 / 2.0).collect();
        let grid4: Vec<f64> = (1..=12).map(|k| k as f64 * 0.05 * t1 / 4.0).collect();
        let f2 = fit_gaussian_decay_time(&grid2, &simulate_coherence_decay(2, t1, &grid2, 40_000, 11)).unwrap();
        let f4 = fit_gaussian_decay_time(&grid4, &simulate_coherence_decay(4, t1, &grid4, 40_000, 11)).unwrap();
        assert_relative_eq!(f2 / f4, 2.0, max_relative = 0.1);
    }

    #[test]
    fn analytic_contrast_matches_monte_carlo() {
        let t1 = 0.1;
        let grid = [0.005, 0.01, 0.02];
        let mc = simulate_coherence_decay(4, t1, &grid, 60_000, 12);
        for (t, c) in grid.iter().zip(&mc) {
            assert_abs_diff_eq!(*c, coherence_contrast_analytic(4, t1, *t), epsilon = 0.02);
        }
    }

    #[test]
    fn raman_leak_routing_splits_dark_and_bright() {
        let cfg = NoiseConfig { sequence_time: 0.05, ..NoiseConfig::default() };
        let leaks = raman_leak_probabilities(&cfg);
        let (_, p1, p2) = raman_populations(0.05, &cfg.raman);
        assert_abs_diff_eq!(leaks.to_dark + leaks.to_bright_leak, 1.0 - p1, epsilon = 1e-12);
        assert_abs_diff_eq!(leaks.to_bright_leak, p2, epsilon = 1e-12);
        // Decay of the initially prepared clock state stays small over the
        // relevant sequence times.
        assert!(leaks.to_dark + leaks.to_bright_leak < 0.04);

        let ideal = NoiseConfig::ideal();
        let none = raman_leak_probabilities(&ideal);
        assert_eq!(none.to_dark, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(NoiseConfig::default().validate().is_ok());
        let bad = NoiseConfig { sigma_rabi_frac: 1.5, ..NoiseConfig::default() };
        assert!(bad.validate().is_err());
        let bad = NoiseConfig { recapture_survival: -0.1, ..NoiseConfig::default() };
        assert!(bad.validate().is_err());
    }
}
