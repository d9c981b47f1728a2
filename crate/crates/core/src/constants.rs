//! Shared physical constants for the Sr-88 lattice-clock platform.

use std::f64::consts::PI;

/// Sr-88 1S0 -> 3P0 clock transition frequency in Hz (CIPM-recommended value).
pub const CLOCK_FREQ_HZ: f64 = 429_228_066_418_012.0;

/// Square lattice spacing in meters.
pub const LATTICE_SPACING_M: f64 = 575e-9;

/// Measured van der Waals coefficient for the 47s Rydberg pair state,
/// 2*pi * 10.4 GHz um^6 expressed in rad/s * m^6.
pub const C6_RAD_M6: f64 = 2.0 * PI * 10.4e9 * 1e-36;

/// Typical Rydberg Rabi frequency, rad/s.
pub const RABI_RAD: f64 = 2.0 * PI * 4.0e6;

/// Phase-update step of the waveform generator, seconds.
pub const PULSE_DT_S: f64 = 6.5e-9;

/// Measured rise time of the Rydberg beam intensity, seconds.
pub const RISE_TIME_S: f64 = 15e-9;

/// Rydberg decay time towards detection-dark states, seconds.
pub const RYDBERG_DARK_LIFETIME_S: f64 = 51e-6;

/// Rydberg decay time towards detection-bright states, seconds.
pub const RYDBERG_BRIGHT_LIFETIME_S: f64 = 86e-6;

/// Lattice Raman scattering rates, Hz.
pub const RAMAN_1_TO_0_HZ: f64 = 0.48;
pub const RAMAN_1_TO_2_HZ: f64 = 0.26;
pub const RAMAN_2_TO_0_HZ: f64 = 0.47;

/// Fractional shot-to-shot standard deviation of the Rydberg Rabi frequency.
pub const SIGMA_RABI_FRAC: f64 = 0.0055;

/// Shot-to-shot standard deviation of the Rydberg detuning, rad/s.
pub const SIGMA_DETUNING_RAD: f64 = 2.0 * PI * 49e3;

/// Lattice photon wavelength, meters.
pub const LATTICE_WAVELENGTH_M: f64 = 813.4275e-9;

/// Rydberg excitation (UV) wavelength, meters.
pub const UV_WAVELENGTH_M: f64 = 317e-9;

/// Mass of Sr-88 in kg.
pub const SR88_MASS_KG: f64 = 87.9056122 * 1.660_539_066_60e-27;

/// Total Rydberg decay rate gamma_d + gamma_b, rad-free 1/s.
pub fn rydberg_decay_rate() -> f64 {
    1.0 / RYDBERG_DARK_LIFETIME_S + 1.0 / RYDBERG_BRIGHT_LIFETIME_S
}
