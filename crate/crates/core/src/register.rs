//! Exact state-vector mechanics for small clock-qubit registers.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * Basis indexing is little-endian: atom `j` is bit `j` of the basis index,
//!   and `n` denotes the number of atoms in the clock state `|1>`.
//! * `X(theta) = prod_j exp(-i theta sigma_x^j / 2)` and likewise for `Z`,
//!   with `sigma_z = diag(+1, -1)` so `|0>` is the `+1` eigenstate. A basis
//!   state with `n` excitations therefore picks up `exp(-i theta (N - 2n)/2)`
//!   under `Z(theta)`. Only parity observables are convention-independent.
//! * The collective gate multiplies a basis state with excitation count `n`
//!   by `exp(i pi n^2 / 2) = i^{n^2}`.

use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("state norm plus deficit is {total} (must be 1 within {NORM_TOL})")]
    NotNormalized { total: f64 },
    #[error("amplitude vector has length {got}, expected 2^{num_atoms}")]
    WrongLength { got: usize, num_atoms: usize },
    #[error("pair ({a}, {b}) is invalid for {num_atoms} atoms")]
    BadPair { a: usize, b: usize, num_atoms: usize },
}

/// Pure state of an `N`-atom register over the computational basis `{0,1}^N`.
///
/// `norm_deficit` accounts for population that leaked out of the computational
/// basis and was traced over; the coherent amplitudes then sum to less than 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    num_atoms: usize,
    amps: Vec<C64>,
    norm_deficit: f64,
}

impl EnsembleState {
    /// `|0>^N`.
    pub fn ground(num_atoms: usize) -> Self {
        assert!(num_atoms >= 1, "register needs at least one atom");
        let mut amps = vec![C64::ZERO; 1 << num_atoms];
        amps[0] = C64::ONE;
        Self { num_atoms, amps, norm_deficit: 0.0 }
    }

    /// Build from explicit amplitudes, validating length and normalization.
    pub fn from_amplitudes(num_atoms: usize, amps: Vec<C64>, norm_deficit: f64) -> Result<Self, StateError> {
        if amps.len() != 1 << num_atoms {
            return Err(StateError::WrongLength { got: amps.len(), num_atoms });
        }
        let state = Self { num_atoms, amps, norm_deficit };
        let total = state.total_probability();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized { total });
        }
        Ok(state)
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_deficit(&self) -> f64 {
        self.norm_deficit
    }

    /// Sum of |amplitude|^2 plus the traced-out deficit.
    pub fn total_probability(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() + self.norm_deficit
    }

    /// Apply a single-qubit unitary `[[u00, u01], [u10, u11]]` to every atom.
    fn apply_uniform_single_qubit(&self, u: [[C64; 2]; 2]) -> Self {
        let mut amps = self.amps.clone();
        for j in 0..self.num_atoms {
            let stride = 1usize << j;
            for base in 0..amps.len() {
                if base & stride == 0 {
                    let a0 = amps[base];
                    let a1 = amps[base | stride];
                    amps[base] = u[0][0] * a0 + u[0][1] * a1;
                    amps[base | stride] = u[1][0] * a0 + u[1][1] * a1;
                }
            }
        }
        Self { num_atoms: self.num_atoms, amps, norm_deficit: self.norm_deficit }
    }

    /// Global `X(theta)`: each atom rotated by `exp(-i theta sigma_x / 2)`.
    pub fn apply_global_x(&self, theta: f64) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let m_is = C64::new(0.0, -s);
        self.apply_uniform_single_qubit([[C64::new(c, 0.0), m_is], [m_is, C64::new(c, 0.0)]])
    }

    /// Global `Z(theta)`: basis state with `n` excitations picks up
    /// `exp(-i theta (N - 2n) / 2)`.
    pub fn apply_global_z(&self, theta: f64) -> Self {
        let n_atoms = self.num_atoms as f64;
        let phases: Vec<C64> = (0..=self.num_atoms)
            .map(|n| C64::from_polar(1.0, -theta * (n_atoms - 2.0 * n as f64) / 2.0))
            .collect();
        self.map_diagonal(|n| phases[n])
    }

    /// Collective entangling gate: phase `i^{n^2}` on each basis state.
    pub fn apply_collective_gate(&self) -> Self {
        // i^{n^2} = 1 for even n, i for odd n.
        self.map_diagonal(|n| if n % 2 == 0 { C64::ONE } else { C64::I })
    }

    /// Same gate written as `(1+i)/2 * I + (1-i)/2 * P` with `P` the
    /// sigma_z-product parity operator (eigenvalue `(-1)^n`); kept as an
    /// independent closed form for cross-checks.
    pub fn apply_collective_gate_parity_form(&self) -> Self {
        let half = C64::new(0.5, 0.5);
        let half_conj = C64::new(0.5, -0.5);
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                let parity = if idx.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                (half + half_conj * parity) * a
            })
            .collect();
        Self { num_atoms: self.num_atoms, amps, norm_deficit: self.norm_deficit }
    }

    /// Third closed form: all pairwise CZ gates, a `Z(pi/2)` rotation and the
    /// global phase `exp(i N pi / 4)`.
    pub fn apply_collective_gate_cz_form(&self) -> Self {
        let pairs: Vec<(usize, usize)> = (0..self.num_atoms)
            .flat_map(|a| (a + 1..self.num_atoms).map(move |b| (a, b)))
            .collect();
        let state = self.apply_pairwise_cz(&pairs).expect("generated pairs are valid");
        let state = state.apply_global_z(FRAC_PI_2);
        let phase = C64::from_polar(1.0, self.num_atoms as f64 * PI / 4.0);
        state.scale(phase)
    }

    /// CZ gate on each listed pair: phase `exp(i pi n_a n_b)`.
    pub fn apply_pairwise_cz(&self, pairs: &[(usize, usize)]) -> Result<Self, StateError> {
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in pairs {
            let key = (a.min(b), a.max(b));
            if a == b || a >= self.num_atoms || b >= self.num_atoms || !seen.insert(key) {
                return Err(StateError::BadPair { a, b, num_atoms: self.num_atoms });
            }
        }
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                let flips = pairs
                    .iter()
                    .filter(|&&(p, q)| idx >> p & 1 == 1 && idx >> q & 1 == 1)
                    .count();
                if flips % 2 == 0 { *a } else { -*a }
            })
            .collect();
        Ok(Self { num_atoms: self.num_atoms, amps, norm_deficit: self.norm_deficit })
    }

    fn map_diagonal(&self, phase_of_n: impl Fn(usize) -> C64) -> Self {
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, a)| phase_of_n(idx.count_ones() as usize) * a)
            .collect();
        Self { num_atoms: self.num_atoms, amps, norm_deficit: self.norm_deficit }
    }

    fn scale(&self, factor: C64) -> Self {
        let amps = self.amps.iter().map(|a| factor * a).collect();
        Self { num_atoms: self.num_atoms, amps, norm_deficit: self.norm_deficit }
    }

    /// Expectation of the sigma_z-product parity, in [-1, 1]. Computed over
    /// the coherent part; traced-out leakage contributes zero.
    pub fn parity_expectation(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                let sign = if idx.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                sign * a.norm_sqr()
            })
            .sum()
    }

    /// Probability of measuring exactly `n` atoms in `|1>`, for n = 0..=N.
    pub fn excitation_populations(&self) -> Vec<f64> {
        let mut pops = vec![0.0; self.num_atoms + 1];
        for (idx, a) in self.amps.iter().enumerate() {
            pops[idx.count_ones() as usize] += a.norm_sqr();
        }
        pops
    }

    /// `p_0 + p_N`: combined population of the two GHZ branches.
    pub fn ghz_populations(&self) -> f64 {
        let pops = self.excitation_populations();
        pops[0] + pops[self.num_atoms]
    }

    /// GHZ-state fidelity: maximal overlap with `(|0..0> + |1..1>)/sqrt(2)`
    /// over a global `Z` rotation. The maximization is analytic: with branch
    /// amplitudes `a`, `b` the result is `|a|^2/2 + |b|^2/2 + |a||b|`.
    pub fn ghz_fidelity(&self) -> Result<f64, StateError> {
        let total = self.total_probability();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized { total });
        }
        let a = self.amps[0];
        let b = self.amps[self.amps.len() - 1];
        Ok(a.norm_sqr() / 2.0 + b.norm_sqr() / 2.0 + a.norm() * b.norm())
    }
}

/// Convex mixture of pure states; all stochastic noise in this crate is
/// trajectory or parameter noise, so weighted pure-state ensembles suffice
/// and memory stays at `2^N` per member.
#[derive(Debug, Clone, Default)]
pub struct StateMixture {
    members: Vec<(f64, EnsembleState)>,
}

impl StateMixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, weight: f64, state: EnsembleState) {
        assert!(weight >= 0.0, "mixture weights must be nonnegative");
        self.members.push((weight, state));
    }

    pub fn members(&self) -> &[(f64, EnsembleState)] {
        &self.members
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|(w, _)| w).sum()
    }

    pub fn parity_expectation(&self) -> f64 {
        let w = self.total_weight();
        self.members.iter().map(|(wi, s)| wi * s.parity_expectation()).sum::<f64>() / w
    }

    /// GHZ fidelity of the mixture. The global-Z maximization must be done
    /// jointly: the cross terms add coherently as `|sum_i w_i a_i* b_i|`.
    pub fn ghz_fidelity(&self) -> Result<f64, StateError> {
        let w = self.total_weight();
        let mut pops = 0.0;
        let mut cross = C64::ZERO;
        for (wi, s) in &self.members {
            let total = s.total_probability();
            if (total - 1.0).abs() > NORM_TOL {
                return Err(StateError::NotNormalized { total });
            }
            let a = s.amps[0];
            let b = s.amps[s.amps.len() - 1];
            pops += wi * (a.norm_sqr() + b.norm_sqr());
            cross += wi * a.conj() * b;
        }
        Ok((pops / 2.0 + cross.norm()) / w)
    }
}

/// `X(pi/2) . U . X(pi/2) |0>^N`: the bare GHZ-preparation circuit. The
/// result is `e^{-i pi/4} (|0>^N + (-i)^{N-1} |1>^N) / sqrt(2)`.
pub fn ghz_circuit(num_atoms: usize) -> EnsembleState {
    EnsembleState::ground(num_atoms)
        .apply_global_x(FRAC_PI_2)
        .apply_collective_gate()
        .apply_global_x(FRAC_PI_2)
}

/// Global Z angle aligning the circuit output with the zero-relative-phase
/// GHZ form. The magnitude `(N-1) pi / (2N)` is convention-independent; the
/// sign is fixed by this crate's `Z` convention.
pub fn ghz_align_angle(num_atoms: usize) -> f64 {
    (num_atoms as f64 - 1.0) * PI / (2.0 * num_atoms as f64)
}

/// The full preparation `Z(align) . X(pi/2) . U . X(pi/2) |0>^N`, equal to
/// `(|0>^N + |1>^N)/sqrt(2)` up to a global phase.
pub fn prepare_ghz(num_atoms: usize) -> EnsembleState {
    ghz_circuit(num_atoms).apply_global_z(ghz_align_angle(num_atoms))
}

/// Parity after the analysis rotations `X(pi/2) . Z(phi_c)` used to read out
/// GHZ coherence.
pub fn analysis_parity(state: &EnsembleState, phi_c: f64) -> f64 {
    state.apply_global_z(phi_c).apply_global_x(FRAC_PI_2).parity_expectation()
}
