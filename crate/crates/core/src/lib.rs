//! Simulation and analysis toolkit for GHZ-state optical-clock metrology with
//! collective Rydberg gates.
//!
//! The crate is organized around the experimental pipeline:
//!
//! * [`register`] — exact state-vector mechanics for small clock-qubit
//!   registers: global rotations, the collective phase gate, parity and
//!   GHZ fidelity.
//! * [`pulse`] / [`grape`] — piecewise-constant Rydberg phase waveforms and
//!   their gradient-based synthesis in the blockaded sector model, including
//!   Rydberg decay and minimal-duration search.
//! * [`geometry`] — square-lattice atom arrangements, van der Waals pair
//!   energies, blockade radius and capacity scaling estimates.
//! * [`fullsim`] — three-level simulation of the preparation/readout circuits
//!   under finite blockade, parameter fluctuations and decay; emits synthetic
//!   shot records.
//! * [`noise`] — stochastic noise parameters, Raman repopulation dynamics and
//!   GHZ coherence decay under correlated dephasing.
//! * [`metrology`] — parity fitting, readout correction, servo-locked clock
//!   runs, overlapping Allan deviation and SQL/HL references.
//! * [`cascade`] — Bayesian phase estimation with cascades of GHZ ensembles.
//! * [`lattice`] — band structure, Wannier overlaps and release-recapture.

pub mod cascade;
pub mod constants;
pub mod fullsim;
pub mod geometry;
pub mod grape;
pub mod lattice;
pub mod metrology;
pub mod noise;
pub mod pulse;
pub mod register;

pub use register::{EnsembleState, StateMixture};
