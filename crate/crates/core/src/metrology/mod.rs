//! Analysis pipeline: parity-oscillation fitting, fidelity extraction,
//! readout correction, servo-locked clock simulation and Allan statistics.

pub mod allan;
pub mod clock;
pub mod fit;
pub mod readout;
pub mod stats;

pub use allan::{overlapping_allan, sql_hl_reference, AllanPoint};
pub use clock::{run_clock_lock, ClockConfig, ClockRun, ContrastMode, NoiseProcess};
pub use fit::{fit_parity, leakage_fit, FitError, LeakageFit, ParityFit};
pub use readout::{correct_populations, measurement_matrix, MeasurementModel};
pub use stats::clopper_pearson;

/// Raw GHZ fidelity from the population sum and parity contrast:
/// `F_raw = (C + p0 + pN) / 2`.
pub fn fidelity_from_parts(p0_plus_pn: f64, contrast: f64) -> f64 {
    (contrast + p0_plus_pn) / 2.0
}
