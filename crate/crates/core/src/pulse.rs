//! Piecewise-constant Rydberg laser phase waveforms.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PulseError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Phase waveform `phi_r(t)` updated every `dt` seconds, with the Rabi
/// frequency multiplied by a smoothstep rise/fall envelope of duration
/// `rise_time` at both ends. The envelope ramps live inside the waveform
/// span, so the reported duration is exactly `len * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePulse {
    /// Phase update step, seconds.
    pub dt: f64,
    /// One phase per step, radians.
    pub phases: Vec<f64>,
    /// Peak Rydberg Rabi frequency, rad/s.
    pub rabi: f64,
    /// Smoothstep rise/fall duration, seconds (0 disables the envelope).
    pub rise_time: f64,
}

impl PhasePulse {
    pub fn new(dt: f64, phases: Vec<f64>, rabi: f64, rise_time: f64) -> Self {
        assert!(!phases.is_empty(), "pulse needs at least one step");
        assert!(dt > 0.0 && dt.is_finite());
        assert!(rise_time >= 0.0);
        assert!(phases.iter().all(|p| p.is_finite()), "phases must be finite");
        Self { dt, phases, rabi, rise_time }
    }

    /// Total waveform duration `len * dt`, seconds.
    pub fn duration(&self) -> f64 {
        self.phases.len() as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Intensity envelope at time `t`: cubic smoothstep from 0 to 1 over
    /// `[0, rise_time]`, back down over the final `rise_time`.
    pub fn envelope_at(&self, t: f64) -> f64 {
        if self.rise_time <= 0.0 {
            return 1.0;
        }
        let total = self.duration();
        let up = smoothstep(t / self.rise_time);
        let down = smoothstep((total - t) / self.rise_time);
        up.min(down)
    }

    /// Envelope evaluated at the midpoint of step `k`; the per-step
    /// propagation treats the coupling as constant across the step.
    pub fn envelope_mid(&self, k: usize) -> f64 {
        self.envelope_at((k as f64 + 0.5) * self.dt)
    }

    /// Resample to half the time step by repeating every phase twice; the
    /// waveform is unchanged, only the envelope sampling gets finer.
    pub fn halve_dt(&self) -> Self {
        let phases = self.phases.iter().flat_map(|&p| [p, p]).collect();
        Self { dt: self.dt / 2.0, phases, rabi: self.rabi, rise_time: self.rise_time }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// A pulse together with the synthesis parameters it was produced under;
/// this is the unit of persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseRecord {
    pub pulse: PhasePulse,
    /// Largest ensemble size the waveform was optimized for.
    pub n_max: u32,
    /// Rydberg decay rate assumed during synthesis, 1/s.
    pub gamma: f64,
    /// Fidelity achieved by the optimizer.
    pub fidelity: f64,
}

impl PulseRecord {
    /// Render as the text format: `key = value` header lines followed by one
    /// phase per line. All floats print in shortest round-trip form, so a
    /// save/load cycle is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# rydberg phase pulse, phases in radians\n");
        let _ = writeln!(out, "n_max = {}", self.n_max);
        let _ = writeln!(out, "rabi_rad_per_s = {}", self.pulse.rabi);
        let _ = writeln!(out, "dt_s = {}", self.pulse.dt);
        let _ = writeln!(out, "rise_time_s = {}", self.pulse.rise_time);
        let _ = writeln!(out, "gamma_per_s = {}", self.gamma);
        let _ = writeln!(out, "fidelity = {}", self.fidelity);
        for p in &self.pulse.phases {
            let _ = writeln!(out, "{p}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PulseError> {
        let mut fields = std::collections::HashMap::new();
        let mut phases = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                fields.insert(key.trim().to_string(), value.trim().to_string());
            } else {
                let phase: f64 = line.parse().map_err(|e| PulseError::Parse {
                    line: idx + 1,
                    msg: format!("bad phase value {line:?}: {e}"),
                })?;
                phases.push(phase);
            }
        }
        let get = |key: &str| {
            fields.get(key).ok_or_else(|| PulseError::Parse {
                line: 0,
                msg: format!("missing header field `{key}`"),
            })
        };
        let parse_f64 = |key: &str| -> Result<f64, PulseError> {
            get(key)?.parse().map_err(|e| PulseError::Parse {
                line: 0,
                msg: format!("bad value for `{key}`: {e}"),
            })
        };
        if phases.is_empty() {
            return Err(PulseError::Parse { line: 0, msg: "no phase samples".into() });
        }
        let n_max = get("n_max")?.parse().map_err(|e| PulseError::Parse {
            line: 0,
            msg: format!("bad value for `n_max`: {e}"),
        })?;
        Ok(Self {
            pulse: PhasePulse::new(
                parse_f64("dt_s")?,
                phases,
                parse_f64("rabi_rad_per_s")?,
                parse_f64("rise_time_s")?,
            ),
            n_max,
            gamma: parse_f64("gamma_per_s")?,
            fidelity: parse_f64("fidelity")?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PulseError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PulseError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn envelope_limits() {
        let pulse = PhasePulse::new(1e-9, vec![0.0; 100], 1.0, 10e-9);
        assert_eq!(pulse.envelope_at(0.0), 0.0);
        assert_eq!(pulse.envelope_at(50e-9), 1.0);
        assert!(pulse.envelope_at(100e-9).abs() < 1e-12);
        assert!((pulse.envelope_at(5e-9) - 0.5).abs() < 1e-12);

        let square = PhasePulse::new(1e-9, vec![0.0; 100], 1.0, 0.0);
        assert_eq!(square.envelope_at(0.0), 1.0);
        assert_eq!(square.envelope_mid(0), 1.0);
    }

    #[test]
    fn halve_dt_preserves_waveform() {
        let pulse = PhasePulse::new(2e-9, vec![0.1, -0.4, 2.0], 5.0, 0.0);
        let fine = pulse.halve_dt();
        assert_eq!(fine.len(), 6);
        assert_eq!(fine.duration(), pulse.duration());
        assert_eq!(fine.phases, vec![0.1, 0.1, -0.4, -0.4, 2.0, 2.0]);
    }

    #[test]
    fn missing_header_field_is_reported() {
        let text = "n_max = 2\ndt_s = 1e-9\n0.25\n";
        let err = PulseRecord::from_text(text).unwrap_err();
        assert!(err.to_string().contains("rabi_rad_per_s"));
    }

    proptest! {
        // Bit-exact persistence round trip.
        #[test]
        fn text_round_trip(
            phases in proptest::collection::vec(-10.0f64..10.0, 1..40),
            rabi in 1e6f64..1e8,
            fidelity in 0.0f64..1.0,
        ) {
            let record = PulseRecord {
                pulse: PhasePulse::new(6.5e-9, phases, rabi, 15e-9),
                n_max: 4,
                gamma: 31236.1234,
                fidelity,
            };
            let back = PulseRecord::from_text(&record.to_text()).unwrap();
            prop_assert_eq!(&back, &record);
            prop_assert_eq!(back.to_text(), record.to_text());
        }
    }
}
