//! Servo-locked atom-laser comparison: Ramsey cycles with GHZ (or CSS)
//! ensembles, a digital integrating servo, and the locally unbiased
//! detuning estimator feeding the Allan analysis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Laser/field frequency-noise models, all expressed as a detuning in Hz
/// averaged over the dark window of each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseProcess {
    None,
    /// Independent Gaussian detuning per cycle.
    WhiteFm { sigma_hz: f64 },
    /// Random-walk detuning: Gaussian increments per cycle.
    RandomWalkFm { step_hz: f64 },
    /// Flicker-like noise approximated by a sum of Ornstein-Uhlenbeck
    /// processes with octave-spaced time constants.
    FlickerFm { sigma_hz: f64, octaves: u32 },
    /// Mains-synchronous sinusoid.
    SinusoidFm { amp_hz: f64, freq_hz: f64, phase: f64 },
}

struct NoiseState {
    process: NoiseProcess,
    walk: f64,
    ou: Vec<f64>,
}

impl NoiseState {
    fn new(process: NoiseProcess) -> Self {
        let ou = match process {
            NoiseProcess::FlickerFm { octaves, .. } => vec![0.0; octaves.max(1) as usize],
            _ => Vec::new(),
        };
        Self { process, walk: 0.0, ou }
    }

    /// Mean detuning (Hz) over the dark window of cycle `q`.
    fn sample(&mut self, q: usize, t_cycle: f64, t_dark: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self.process {
            NoiseProcess::None => 0.0,
            NoiseProcess::WhiteFm { sigma_hz } => {
                Normal::new(0.0, sigma_hz).unwrap().sample(rng)
            }
            NoiseProcess::RandomWalkFm { step_hz } => {
                self.walk += Normal::new(0.0, step_hz).unwrap().sample(rng);
                self.walk
            }
            NoiseProcess::FlickerFm { sigma_hz, octaves } => {
                let k = octaves.max(1) as usize;
                let per = sigma_hz / (k as f64).sqrt();
                let mut total = 0.0;
                for (j, state) in self.ou.iter_mut().enumerate() {
                    let tau = t_cycle * 2f64.powi(j as i32 + 1);
                    let decay = (-t_cycle / tau).exp();
                    let drive = per * (1.0 - decay * decay).sqrt();
                    *state = *state * decay + Normal::new(0.0, drive).unwrap().sample(rng);
                    total += *state;
                }
                total
            }
            NoiseProcess::SinusoidFm { amp_hz, freq_hz, phase } => {
                // Average of the sinusoid over the dark window.
                let t0 = q as f64 * t_cycle;
                let w = 2.0 * PI * freq_hz;
                if w * t_dark < 1e-9 {
                    amp_hz * (w * t0 + phase).sin()
                } else {
                    amp_hz * ((w * t0 + phase).cos() - (w * (t0 + t_dark) + phase).cos())
                        / (w * t_dark)
                }
            }
        }
    }
}

/// How the contrast entering the estimator depends on the realized
/// ensemble size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastMode {
    /// Use the calibrated maximum-size contrast for every fill, which
    /// overestimates the noise and bounds the instability from above.
    MaxSizeOnly,
    /// Look up the exact per-size contrast.
    PerSize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockConfig {
    /// Copies of the GHZ ensemble interrogated per cycle.
    pub ensembles: u32,
    /// Nominal atoms per ensemble; 1 with `ensembles = M * N` realizes the
    /// CSS comparison.
    pub ensemble_size: u32,
    /// Parity contrast per size (index = size - 1).
    pub contrast: Vec<f64>,
    pub contrast_mode: ContrastMode,
    /// Ramsey dark time, seconds.
    pub dark_time: f64,
    /// Full cycle duration, seconds.
    pub cycle_time: f64,
    /// Clock transition frequency, Hz.
    pub nu0: f64,
    pub cycles: usize,
    /// Integrating-servo gain.
    pub gain: f64,
    /// Per-atom rearrangement success probability; unfilled ensembles are
    /// dropped from the estimator.
    pub fill_probability: f64,
    pub noise: NoiseProcess,
    /// Quantum projection noise: when false the parity takes its
    /// expectation value (deterministic diagnostics mode).
    pub projection_noise: bool,
    pub seed: u64,
}

impl ClockConfig {
    pub fn ideal_ghz(ensembles: u32, ensemble_size: u32, cycles: usize, seed: u64) -> Self {
        Self {
            ensembles,
            ensemble_size,
            contrast: vec![1.0; ensemble_size as usize],
            contrast_mode: ContrastMode::MaxSizeOnly,
            dark_time: 3e-3,
            cycle_time: 1.26,
            nu0: crate::constants::CLOCK_FREQ_HZ,
            cycles,
            gain: 0.3,
            fill_probability: 1.0,
            noise: NoiseProcess::None,
            projection_noise: true,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClockRun {
    /// Locally unbiased detuning estimate per cycle (servo input), Hz.
    pub delta_est: Vec<f64>,
    /// Accumulated servo correction per cycle, Hz.
    pub delta_corr: Vec<f64>,
    /// Fractional-frequency series `delta_est / nu0` for Allan analysis.
    pub fractional_y: Vec<f64>,
    /// Cycles skipped because no ensemble survived rearrangement.
    pub skipped: usize,
}

/// Run the servo-locked comparison. Each cycle: draw the noise detuning,
/// integrate the Ramsey phase per ensemble, convert binary parity outcomes
/// through the locally unbiased estimator about zero detuning, and feed the
/// integrating servo whose correction applies from the next cycle.
pub fn run_clock_lock(cfg: &ClockConfig) -> ClockRun {
    assert!(cfg.ensemble_size >= 1 && cfg.ensembles >= 1);
    assert!(cfg.dark_time > 0.0 && cfg.dark_time < cfg.cycle_time);
    assert!(cfg.contrast.len() >= cfg.ensemble_size as usize);
    assert!(cfg.contrast.iter().all(|&c| c > 0.0));
    assert!(cfg.cycles >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = NoiseState::new(cfg.noise);
    let mut delta_corr = 0.0f64;
    let mut run = ClockRun {
        delta_est: Vec::with_capacity(cfg.cycles),
        delta_corr: Vec::with_capacity(cfg.cycles),
        fractional_y: Vec::with_capacity(cfg.cycles),
        skipped: 0,
    };

    for q in 0..cfg.cycles {
        let detuning = noise.sample(q, cfg.cycle_time, cfg.dark_time, &mut rng) - delta_corr;
        let mut estimate = 0.0;
        let mut used = 0u32;
        for _ in 0..cfg.ensembles {
            let size = if cfg.fill_probability >= 1.0 {
                cfg.ensemble_size
            } else {
                (0..cfg.ensemble_size)
                    .filter(|_| rng.gen::<f64>() < cfg.fill_probability)
                    .count() as u32
            };
            if size == 0 {
                continue;
            }
            let contrast_true = cfg.contrast[size as usize - 1];
            let contrast_assumed = match cfg.contrast_mode {
                ContrastMode::MaxSizeOnly => cfg.contrast[cfg.ensemble_size as usize - 1],
                ContrastMode::PerSize => contrast_true,
            };
            let theta = 2.0 * PI * size as f64 * detuning * cfg.dark_time;
            let parity = if cfg.projection_noise {
                let p_even = (1.0 + contrast_true * theta.sin()) / 2.0;
                if rng.gen::<f64>() < p_even { 1.0 } else { -1.0 }
            } else {
                contrast_true * theta.sin()
            };
            estimate +=
                parity / (2.0 * PI * size as f64 * contrast_assumed * cfg.dark_time);
            used += 1;
        }
        if used == 0 {
            run.skipped += 1;
            continue;
        }
        let delta_est = estimate / used as f64;
        delta_corr += cfg.gain * delta_est;
        run.delta_est.push(delta_est);
        run.delta_corr.push(delta_corr);
        run.fractional_y.push(delta_est / cfg.nu0);
    }
    run
}

/// Sample standard deviation of the per-cycle estimates.
pub fn estimate_std(run: &ClockRun) -> f64 {
    let n = run.delta_est.len() as f64;
    let mean = run.delta_est.iter().sum::<f64>() / n;
    (run.delta_est.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}
