//! Three-level simulation of the GHZ preparation and readout circuits under
//! finite blockade, parameter fluctuations, Rydberg decay and leakage.
//!
//! Each atom carries levels {ground, clock, rydberg}; the register state is
//! a dense vector over `3^N` (N <= 10). Coherent evolution under one pulse
//! step uses a Krylov (Lanczos) propagator of the piecewise-constant
//! Hamiltonian, with the step subdivided so the spectral spread per substep
//! stays moderate. Rydberg decay is unravelled into quantum-trajectory
//! jumps that remove the decayed atom from the coherent register and record
//! a dark or bright leak flag.

use crate::geometry::Arrangement;
use crate::noise::{self, NoiseConfig};
use crate::pulse::PhasePulse;
use crate::register::EnsembleState;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("register of {0} atoms exceeds the 3^N dense-vector limit (N <= 10)")]
    DimensionOverflow(usize),
    #[error("arrangement holds {arr} atoms but the register has {state}")]
    SizeMismatch { arr: usize, state: usize },
}

pub const LEVEL_GROUND: u8 = 0;
pub const LEVEL_CLOCK: u8 = 1;
pub const LEVEL_RYDBERG: u8 = 2;

const MAX_ATOMS: usize = 10;

/// Dense state over `{ground, clock, rydberg}^N`, little-endian base-3
/// digits (atom `j` is digit `j`).
#[derive(Debug, Clone)]
pub struct MultiState {
    num_atoms: usize,
    amps: Vec<C64>,
}

fn pow3(n: usize) -> usize {
    3usize.pow(n as u32)
}

impl MultiState {
    pub fn ground(num_atoms: usize) -> Result<Self, SimError> {
        if num_atoms == 0 || num_atoms > MAX_ATOMS {
            return Err(SimError::DimensionOverflow(num_atoms));
        }
        let mut amps = vec![C64::ZERO; pow3(num_atoms)];
        amps[0] = C64::ONE;
        Ok(Self { num_atoms, amps })
    }

    /// Embed a computational-basis state (the Rydberg level unpopulated).
    pub fn from_register(state: &EnsembleState) -> Result<Self, SimError> {
        let n = state.num_atoms();
        let mut out = Self::ground(n)?;
        out.amps[0] = C64::ZERO;
        for (bits, amp) in state.amplitudes().iter().enumerate() {
            let mut idx = 0;
            for j in 0..n {
                if bits >> j & 1 == 1 {
                    idx += pow3(j);
                }
            }
            out.amps[idx] = *amp;
        }
        Ok(out)
    }

    /// Project onto the computational subspace; population outside it
    /// becomes the register's norm deficit.
    pub fn to_register(&self) -> EnsembleState {
        let n = self.num_atoms;
        let mut amps = vec![C64::ZERO; 1 << n];
        'outer: for (idx, amp) in self.amps.iter().enumerate() {
            let mut bits = 0usize;
            let mut rest = idx;
            for j in 0..n {
                let digit = (rest % 3) as u8;
                rest /= 3;
                match digit {
                    LEVEL_GROUND => {}
                    LEVEL_CLOCK => bits |= 1 << j,
                    _ => continue 'outer,
                }
            }
            amps[bits] = *amp;
        }
        let coherent: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let deficit = (self.norm_sqr() - coherent).max(0.0);
        EnsembleState::from_amplitudes(n, amps, deficit).expect("projection preserves the norm")
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn renormalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= norm);
        }
    }

    /// Total weight on states holding at least `k` Rydberg excitations.
    pub fn rydberg_weight_at_least(&self, k: u32) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| rydberg_count(*idx, self.num_atoms) >= k)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Global clock-transition rotation `exp(-i theta sigma_x / 2)` per atom;
    /// the Rydberg level is untouched.
    pub fn apply_clock_x(&self, theta: f64) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let m_is = C64::new(0.0, -s);
        let mut amps = self.amps.clone();
        for j in 0..self.num_atoms {
            let step = pow3(j);
            for idx in 0..amps.len() {
                if idx / step % 3 == 0 {
                    let partner = idx + step;
                    let a0 = amps[idx];
                    let a1 = amps[partner];
                    amps[idx] = c * a0 + m_is * a1;
                    amps[partner] = m_is * a0 + c * a1;
                }
            }
        }
        Self { num_atoms: self.num_atoms, amps }
    }

    /// Global clock-transition phase rotation; `|0>` picks up `e^{-i theta/2}`
    /// and `|1>` `e^{+i theta/2}` per atom, matching the register convention.
    pub fn apply_clock_z(&self, theta: f64) -> Self {
        let phases = [
            C64::from_polar(1.0, -theta / 2.0),
            C64::from_polar(1.0, theta / 2.0),
            C64::ONE,
        ];
        let mut amps = self.amps.clone();
        for (idx, amp) in amps.iter_mut().enumerate() {
            let mut rest = idx;
            let mut factor = C64::ONE;
            for _ in 0..self.num_atoms {
                factor *= phases[rest % 3];
                rest /= 3;
            }
            *amp *= factor;
        }
        Self { num_atoms: self.num_atoms, amps }
    }

    /// Sample per-atom levels from `|psi|^2` (state need not be normalized).
    pub fn sample_levels(&self, rng: &mut impl Rng) -> Vec<u8> {
        let total = self.norm_sqr();
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = self.amps.len() - 1;
        for (idx, amp) in self.amps.iter().enumerate() {
            target -= amp.norm_sqr();
            if target <= 0.0 {
                chosen = idx;
                break;
            }
        }
        let mut levels = Vec::with_capacity(self.num_atoms);
        let mut rest = chosen;
        for _ in 0..self.num_atoms {
            levels.push((rest % 3) as u8);
            rest /= 3;
        }
        levels
    }
}

fn rydberg_count(idx: usize, num_atoms: usize) -> u32 {
    let mut rest = idx;
    let mut count = 0;
    for _ in 0..num_atoms {
        if rest % 3 == 2 {
            count += 1;
        }
        rest /= 3;
    }
    count
}

/// Blockade treatment for the pair interaction term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockadeMode {
    /// Infinite blockade: multi-Rydberg states are projected out, which
    /// reproduces the sector model exactly.
    Projected,
    /// Pair energies from the arrangement. States holding more than
    /// `max_rydberg` simultaneous excitations are truncated (their
    /// amplitudes are negligible for blockaded drives), and `v_cap`
    /// optionally clamps the strongest pairs so the spectral spread stays
    /// integrable for single-site spacings.
    Finite { max_rydberg: u32, v_cap: Option<f64> },
}

impl BlockadeMode {
    pub fn finite() -> Self {
        BlockadeMode::Finite { max_rydberg: 2, v_cap: None }
    }

    fn max_rydberg(&self) -> u32 {
        match self {
            BlockadeMode::Projected => 1,
            BlockadeMode::Finite { max_rydberg, .. } => *max_rydberg,
        }
    }
}

/// Per-shot drive realization: Rabi frequency and detuning per atom, rad/s.
#[derive(Debug, Clone)]
pub struct DriveParams {
    pub rabi: Vec<f64>,
    pub detuning: Vec<f64>,
}

impl DriveParams {
    pub fn uniform(num_atoms: usize, rabi: f64) -> Self {
        Self { rabi: vec![rabi; num_atoms], detuning: vec![0.0; num_atoms] }
    }
}

/// Frozen Hamiltonian bookkeeping for one register size: diagonal (pair
/// energies minus detunings), hop rules and the spectral-spread bound that
/// sets the substep size.
struct HamiltonianCtx {
    num_atoms: usize,
    rabi_half: Vec<f64>,
    diag: Vec<f64>,
    r_count: Vec<u8>,
    max_rydberg: u8,
    diag_shift: f64,
    spread: f64,
}

impl HamiltonianCtx {
    fn new(drive: &DriveParams, pair_energies: Option<&[Vec<f64>]>, mode: BlockadeMode) -> Self {
        let num_atoms = drive.rabi.len();
        let dim = pow3(num_atoms);
        let max_rydberg = mode.max_rydberg() as u8;
        let v_cap = match mode {
            BlockadeMode::Finite { v_cap, .. } => v_cap,
            BlockadeMode::Projected => None,
        };
        let mut diag = vec![0.0; dim];
        let mut r_count = vec![0u8; dim];
        let mut reach_lo = f64::INFINITY;
        let mut reach_hi = f64::NEG_INFINITY;
        for idx in 0..dim {
            let mut rest = idx;
            let mut r_atoms = Vec::new();
            for j in 0..num_atoms {
                if rest % 3 == 2 {
                    r_atoms.push(j);
                }
                rest /= 3;
            }
            r_count[idx] = r_atoms.len() as u8;
            let mut energy = 0.0;
            for &j in &r_atoms {
                energy -= drive.detuning[j];
            }
            if let Some(v) = pair_energies {
                for (a, &i) in r_atoms.iter().enumerate() {
                    for &j in &r_atoms[a + 1..] {
                        let mut e = v[i][j];
                        if let Some(cap) = v_cap {
                            e = e.min(cap);
                        }
                        energy += e;
                    }
                }
            }
            diag[idx] = energy;
            if r_count[idx] <= max_rydberg {
                reach_lo = reach_lo.min(energy);
                reach_hi = reach_hi.max(energy);
            }
        }
        let coupling: f64 = drive.rabi.iter().map(|r| r / 2.0).sum();
        let diag_shift = (reach_lo + reach_hi) / 2.0;
        diag.iter_mut().for_each(|d| *d -= diag_shift);
        let spread = (reach_hi - reach_lo) + 2.0 * coupling;
        Self {
            num_atoms,
            rabi_half: drive.rabi.iter().map(|r| r / 2.0).collect(),
            diag,
            r_count,
            max_rydberg,
            diag_shift,
            spread,
        }
    }

    /// `out = H v` with the coupling scaled by `env` and phase `phi`:
    /// `<r|H|1> = env * rabi/2 * e^{i phi}` per atom, which reproduces the
    /// sector-model convention on symmetric states.
    fn apply(&self, phi: f64, env: f64, v: &[C64], out: &mut [C64]) {
        let up = C64::from_polar(env, phi);
        for (idx, o) in out.iter_mut().enumerate() {
            *o = self.diag[idx] * v[idx];
        }
        for j in 0..self.num_atoms {
            let step = pow3(j);
            let coupling = self.rabi_half[j];
            if coupling == 0.0 {
                continue;
            }
            for idx in 0..v.len() {
                let digit = idx / step % 3;
                if digit == 1 {
                    if self.r_count[idx] < self.max_rydberg {
                        out[idx + step] += coupling * up * v[idx];
                    }
                } else if digit == 2 {
                    out[idx - step] += coupling * up.conj() * v[idx];
                }
            }
        }
    }
}

/// Target Krylov angle per substep; fewer, harder steps for larger values.
const THETA_PER_SUBSTEP: f64 = 40.0;

/// Krylov propagation `psi <- exp(-i h H) psi` with full
/// reorthogonalization and a residual-based stopping rule.
fn lanczos_expm(ctx: &HamiltonianCtx, phi: f64, env: f64, h: f64, psi: &mut Vec<C64>) {
    let dim = psi.len();
    let norm0 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm0 < 1e-300 {
        return;
    }
    const M_MAX: usize = 56;
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(M_MAX);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    basis.push(psi.iter().map(|a| a / norm0).collect());
    let mut w = vec![C64::ZERO; dim];
    let mut result: Option<Vec<C64>> = None;

    for j in 0..M_MAX {
        ctx.apply(phi, env, &basis[j], &mut w);
        let alpha = basis[j].iter().zip(&w).map(|(v, wv)| (v.conj() * wv).re).sum::<f64>();
        alphas.push(alpha);
        for (v, wv) in basis[j].iter().zip(w.iter_mut()) {
            *wv -= alpha * v;
        }
        if j > 0 {
            let beta_prev = betas[j - 1];
            for (v, wv) in basis[j - 1].iter().zip(w.iter_mut()) {
                *wv -= beta_prev * v;
            }
        }
        for prev in &basis {
            let overlap: C64 = prev.iter().zip(&w).map(|(v, wv)| v.conj() * wv).sum();
            for (v, wv) in prev.iter().zip(w.iter_mut()) {
                *wv -= overlap * v;
            }
        }
        let beta = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();

        let exhausted = beta < 1e-12 || j + 1 == M_MAX;
        if exhausted || (j >= 3 && (j + 1) % 4 == 0) {
            let m = j + 1;
            let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alphas[i];
                if i + 1 < m {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = nalgebra::SymmetricEigen::new(t);
            // y = U exp(-i h Lambda) U^T e1
            let mut y = vec![C64::ZERO; m];
            for col in 0..m {
                let phase = C64::from_polar(1.0, -h * eig.eigenvalues[col]);
                let weight = eig.eigenvectors[(0, col)];
                for (row, slot) in y.iter_mut().enumerate() {
                    *slot += eig.eigenvectors[(row, col)] * phase * weight;
                }
            }
            let residual = beta * h * y[m - 1].norm();
            if residual < 1e-11 || exhausted {
                let mut out = vec![C64::ZERO; dim];
                for (row, coeff) in y.iter().enumerate() {
                    let scaled = coeff * norm0;
                    for (o, v) in out.iter_mut().zip(&basis[row]) {
                        *o += scaled * v;
                    }
                }
                result = Some(out);
                break;
            }
        }
        betas.push(beta);
        basis.push(w.iter().map(|a| a / beta).collect());
    }
    *psi = result.expect("Krylov loop always assembles a result");
    // Undo the diagonal shift applied in the context.
    let global = C64::from_polar(1.0, -h * ctx.diag_shift);
    psi.iter_mut().for_each(|a| *a *= global);
}

fn evolve_one_step(ctx: &HamiltonianCtx, phi: f64, env: f64, dt: f64, psi: &mut Vec<C64>) {
    let substeps = (ctx.spread * dt / THETA_PER_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        lanczos_expm(ctx, phi, env, h, psi);
    }
}

/// Coherent evolution of the register across the whole pulse (no decay).
pub fn evolve_full(
    state: &MultiState,
    pulse: &PhasePulse,
    arrangement: Option<&Arrangement>,
    mode: BlockadeMode,
    drive: &DriveParams,
) -> Result<MultiState, SimError> {
    if state.num_atoms > MAX_ATOMS {
        return Err(SimError::DimensionOverflow(state.num_atoms));
    }
    if let Some(arr) = arrangement {
        if arr.num_atoms() != state.num_atoms {
            return Err(SimError::SizeMismatch { arr: arr.num_atoms(), state: state.num_atoms });
        }
    }
    let pair = arrangement.map(|a| a.pair_interactions());
    let ctx = HamiltonianCtx::new(drive, pair.as_deref(), mode);
    let mut amps = state.amps.clone();
    for (k, &phi) in pulse.phases.iter().enumerate() {
        evolve_one_step(&ctx, phi, pulse.envelope_mid(k), pulse.dt, &mut amps);
    }
    Ok(MultiState { num_atoms: state.num_atoms, amps })
}

/// Where a decayed or lost atom ends up for the detection scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakKind {
    Dark,
    Bright,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakEvent {
    /// Original atom index.
    pub atom: usize,
    pub kind: LeakKind,
}

/// Trajectory evolution with Rydberg decay: non-Hermitian damping between
/// jumps; each jump projects the decayed atom onto the Rydberg level,
/// removes it from the coherent register and records a leak.
fn evolve_pulse_trajectory(
    state: MultiState,
    pulse: &PhasePulse,
    pair_full: Option<&[Vec<f64>]>,
    mode: BlockadeMode,
    drive: &DriveParams,
    gamma_dark: f64,
    gamma_bright: f64,
    rng: &mut impl Rng,
) -> (MultiState, Vec<usize>, Vec<LeakEvent>) {
    let gamma = gamma_dark + gamma_bright;
    let mut alive: Vec<usize> = (0..state.num_atoms).collect();
    let mut leaks = Vec::new();
    let mut psi = state;
    let submatrix = |alive: &[usize]| {
        pair_full.map(|v| {
            alive
                .iter()
                .map(|&i| alive.iter().map(|&j| v[i][j]).collect::<Vec<f64>>())
                .collect::<Vec<_>>()
        })
    };
    let mut sub_drive = drive.clone();
    let mut ctx = HamiltonianCtx::new(&sub_drive, submatrix(&alive).as_deref(), mode);
    let mut jump_target: f64 = rng.gen::<f64>().max(1e-300);

    for (k, &phi) in pulse.phases.iter().enumerate() {
        let env = pulse.envelope_mid(k);
        let substeps = (ctx.spread * pulse.dt / THETA_PER_SUBSTEP).ceil().max(1.0) as usize;
        let h = pulse.dt / substeps as f64;
        for _ in 0..substeps {
            lanczos_expm(&ctx, phi, env, h, &mut psi.amps);
            if gamma == 0.0 {
                continue;
            }
            for (idx, amp) in psi.amps.iter_mut().enumerate() {
                let r = ctx.r_count[idx] as f64;
                if r > 0.0 {
                    *amp *= (-0.5 * gamma * r * h).exp();
                }
            }
            if psi.norm_sqr() >= jump_target {
                continue;
            }
            // A decay fired within this substep: pick the atom by its
            // Rydberg weight and route it dark or bright by branching ratio.
            let weights: Vec<f64> = (0..psi.num_atoms)
                .map(|j| {
                    psi.amps
                        .iter()
                        .enumerate()
                        .filter(|(idx, _)| idx / pow3(j) % 3 == 2)
                        .map(|(_, a)| a.norm_sqr())
                        .sum()
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                jump_target = (rng.gen::<f64>() * psi.norm_sqr()).max(1e-300);
                continue;
            }
            let mut pick = rng.gen::<f64>() * total;
            let mut atom = psi.num_atoms - 1;
            for (j, w) in weights.iter().enumerate() {
                pick -= w;
                if pick <= 0.0 {
                    atom = j;
                    break;
                }
            }
            let kind = if rng.gen::<f64>() < gamma_dark / gamma { LeakKind::Dark } else { LeakKind::Bright };
            leaks.push(LeakEvent { atom: alive[atom], kind });

            let new_n = psi.num_atoms - 1;
            let step = pow3(atom);
            let mut new_amps = vec![C64::ZERO; pow3(new_n.max(1)) * if new_n == 0 { 0 } else { 1 }];
            if new_n > 0 {
                new_amps = vec![C64::ZERO; pow3(new_n)];
                for (new_idx, slot) in new_amps.iter_mut().enumerate() {
                    let low = new_idx % step;
                    let high = new_idx / step;
                    *slot = psi.amps[high * step * 3 + 2 * step + low];
                }
            }
            alive.remove(atom);
            if new_n == 0 {
                return (MultiState { num_atoms: 0, amps: Vec::new() }, alive, leaks);
            }
            psi = MultiState { num_atoms: new_n, amps: new_amps };
            psi.renormalize();
            sub_drive = DriveParams {
                rabi: alive.iter().map(|&i| drive.rabi[i]).collect(),
                detuning: alive.iter().map(|&i| drive.detuning[i]).collect(),
            };
            ctx = HamiltonianCtx::new(&sub_drive, submatrix(&alive).as_deref(), mode);
            jump_target = rng.gen::<f64>().max(1e-300);
        }
    }
    (psi, alive, leaks)
}

/// What happens between preparation and the fluorescence image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Readout {
    /// Image directly: measures the GHZ populations `p_0 + p_N`.
    Population,
    /// Apply the analysis rotations `X(pi/2) . Z(phi_c)` first: measures
    /// parity at the given phase.
    Parity(f64),
}

/// One measured repetition of the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub shot: u64,
    pub ensemble_id: u32,
    /// Analysis phase of this shot (radians); `None` for population shots.
    pub phi_c: Option<f64>,
    /// Bright/dark outcome per atom, atom 0 first.
    pub outcomes: Vec<bool>,
    /// Number of bright atoms.
    pub n_bright: u32,
    /// Atoms that left the computational basis (decay, loss, scattering).
    pub leaked: Vec<bool>,
}

impl ShotRecord {
    /// Sigma-z product parity of the measured bitstring.
    pub fn parity(&self) -> i8 {
        if self.n_bright % 2 == 0 { 1 } else { -1 }
    }
}

/// Configuration of a synthetic GHZ preparation/readout run.
#[derive(Debug, Clone)]
pub struct GhzExperiment {
    pub pulse: PhasePulse,
    /// None simulates the infinite-blockade limit without pair energies.
    pub arrangement: Option<Arrangement>,
    pub mode: BlockadeMode,
    pub noise: NoiseConfig,
    /// Number of atoms; must match the arrangement when one is given.
    pub num_atoms: usize,
    /// Compensating clock phase between the gate and the closing X(pi/2);
    /// calibrate with [`calibrate_alpha`].
    pub alpha_c: f64,
    pub seed: u64,
}

/// Deterministic (mean-parameter, decay-free) preparation; the returned
/// register carries residual Rydberg population as norm deficit.
pub fn prepare_ghz_state(
    pulse: &PhasePulse,
    arrangement: Option<&Arrangement>,
    mode: BlockadeMode,
    num_atoms: usize,
    alpha_c: f64,
) -> Result<EnsembleState, SimError> {
    let drive = DriveParams::uniform(num_atoms, pulse.rabi);
    let state = MultiState::ground(num_atoms)?.apply_clock_x(FRAC_PI_2);
    let state = evolve_full(&state, pulse, arrangement, mode, &drive)?;
    Ok(state.apply_clock_z(alpha_c).apply_clock_x(FRAC_PI_2).to_register())
}

/// Calibrate the compensating phase by maximizing the GHZ populations
/// `p_0 + p_N` of the noiseless circuit, mirroring the experimental scan.
pub fn calibrate_alpha(
    pulse: &PhasePulse,
    arrangement: Option<&Arrangement>,
    mode: BlockadeMode,
    num_atoms: usize,
) -> Result<f64, SimError> {
    let drive = DriveParams::uniform(num_atoms, pulse.rabi);
    let state = MultiState::ground(num_atoms)?.apply_clock_x(FRAC_PI_2);
    let evolved = evolve_full(&state, pulse, arrangement, mode, &drive)?;
    let pops = |alpha: f64| {
        evolved.apply_clock_z(alpha).apply_clock_x(FRAC_PI_2).to_register().ghz_populations()
    };
    // p0 + pN is pi-periodic in alpha; scan then golden-section refine.
    const GRID: usize = 96;
    let mut best_k = 0;
    let mut best = f64::MIN;
    for k in 0..GRID {
        let val = pops(std::f64::consts::PI * k as f64 / GRID as f64);
        if val > best {
            best = val;
            best_k = k;
        }
    }
    let spacing = std::f64::consts::PI / GRID as f64;
    let (mut lo, mut hi) = ((best_k as f64 - 1.0) * spacing, (best_k as f64 + 1.0) * spacing);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (pops(x1), pops(x2));
    while hi - lo > 1e-10 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = pops(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = pops(x1);
        }
    }
    Ok((lo + hi) / 2.0)
}

/// Simulate `shots` repetitions per readout setting. Shots are independent
/// and reproducible: shot `s` draws from the dedicated RNG stream
/// `(seed, s)`, so results do not depend on scheduling.
pub fn simulate_ghz_experiment(
    exp: &GhzExperiment,
    readouts: &[Readout],
    shots: usize,
) -> Result<Vec<ShotRecord>, SimError> {
    let num_atoms = exp.num_atoms;
    if num_atoms == 0 || num_atoms > MAX_ATOMS {
        return Err(SimError::DimensionOverflow(num_atoms));
    }
    if let Some(arr) = &exp.arrangement {
        if arr.num_atoms() != num_atoms {
            return Err(SimError::SizeMismatch { arr: arr.num_atoms(), state: num_atoms });
        }
    }
    exp.noise.validate().expect("invalid noise configuration");
    let pair = exp.arrangement.as_ref().map(|a| a.pair_interactions());
    let leak_probs = noise::raman_leak_probabilities(&exp.noise);
    let jobs: Vec<(u64, Readout)> = readouts
        .iter()
        .enumerate()
        .flat_map(|(pi, &readout)| (0..shots).map(move |s| ((pi * shots + s) as u64, readout)))
        .collect();

    jobs.par_iter()
        .map(|&(shot, readout)| {
            let mut rng = noise::shot_rng(exp.seed, shot);
            let (rabi, global_detuning) = noise::draw_rabi_detuning(&exp.noise, exp.pulse.rabi, &mut rng);
            let detuning: Vec<f64> = if exp.noise.detuning_per_atom {
                (0..num_atoms)
                    .map(|_| noise::draw_rabi_detuning(&exp.noise, exp.pulse.rabi, &mut rng).1)
                    .collect()
            } else {
                vec![global_detuning; num_atoms]
            };
            let drive = DriveParams { rabi: vec![rabi; num_atoms], detuning };

            let state = MultiState::ground(num_atoms)?.apply_clock_x(FRAC_PI_2);
            let (survived, alive, mut leaks) = evolve_pulse_trajectory(
                state,
                &exp.pulse,
                pair.as_deref(),
                exp.mode,
                &drive,
                exp.noise.gamma_dark,
                exp.noise.gamma_bright,
                &mut rng,
            );

            let mut outcomes = vec![false; num_atoms];
            let mut leak_flags = vec![false; num_atoms];
            if !alive.is_empty() {
                let prepared = survived.apply_clock_z(exp.alpha_c).apply_clock_x(FRAC_PI_2);
                let mut final_state = match readout {
                    Readout::Population => prepared,
                    Readout::Parity(phi_c) => {
                        prepared.apply_clock_z(phi_c).apply_clock_x(FRAC_PI_2)
                    }
                };
                final_state.renormalize();
                let levels = final_state.sample_levels(&mut rng);
                for (slot, level) in alive.iter().zip(levels) {
                    match level {
                        LEVEL_CLOCK => outcomes[*slot] = true,
                        LEVEL_RYDBERG => {
                            // Residual Rydberg population decays before the
                            // image; route it like mid-gate decay.
                            let gamma = exp.noise.gamma_total();
                            let dark = if gamma > 0.0 {
                                rng.gen::<f64>() < exp.noise.gamma_dark / gamma
                            } else {
                                true
                            };
                            outcomes[*slot] = !dark;
                            leaks.push(LeakEvent {
                                atom: *slot,
                                kind: if dark { LeakKind::Dark } else { LeakKind::Bright },
                            });
                        }
                        _ => {}
                    }
                }
            }
            for leak in &leaks {
                leak_flags[leak.atom] = true;
                outcomes[leak.atom] = matches!(leak.kind, LeakKind::Bright);
            }

            // Release-recapture loss: a lost atom images dark.
            if exp.noise.recapture_survival < 1.0 {
                for atom in 0..num_atoms {
                    if rng.gen::<f64>() > exp.noise.recapture_survival {
                        outcomes[atom] = false;
                        leak_flags[atom] = true;
                    }
                }
            }
            // Raman scattering of the clock state during the detection ramp.
            if leak_probs.to_dark + leak_probs.to_bright_leak > 0.0 {
                for atom in 0..num_atoms {
                    if outcomes[atom] && !leak_flags[atom] {
                        let draw = rng.gen::<f64>();
                        if draw < leak_probs.to_dark {
                            outcomes[atom] = false;
                            leak_flags[atom] = true;
                        } else if draw < leak_probs.to_dark + leak_probs.to_bright_leak {
                            leak_flags[atom] = true;
                        }
                    }
                }
            }

            let n_bright = outcomes.iter().filter(|&&b| b).count() as u32;
            let phi_c = match readout {
                Readout::Population => None,
                Readout::Parity(phi) => Some(phi),
            };
            Ok(ShotRecord { shot, ensemble_id: 0, phi_c, outcomes, n_bright, leaked: leak_flags })
        })
        .collect()
}

/// Mean parity and shot count per analysis phase; population shots are
/// ignored.
pub fn parity_by_phase(records: &[ShotRecord]) -> Vec<(f64, f64, usize)> {
    let mut table: Vec<(f64, f64, usize)> = Vec::new();
    for rec in records {
        let Some(phi_c) = rec.phi_c else { continue };
        match table.iter_mut().find(|(phi, _, _)| *phi == phi_c) {
            Some((_, sum, count)) => {
                *sum += rec.parity() as f64;
                *count += 1;
            }
            None => table.push((phi_c, rec.parity() as f64, 1)),
        }
    }
    table.into_iter().map(|(phi, sum, count)| (phi, sum / count as f64, count)).collect()
}

/// Fraction of population shots found in the two GHZ branches (all dark or
/// all bright among non-leaked... the raw observable counts every atom).
pub fn ghz_population_fraction(records: &[ShotRecord], num_atoms: u32) -> f64 {
    let pop: Vec<_> = records.iter().filter(|r| r.phi_c.is_none()).collect();
    assert!(!pop.is_empty(), "no population shots in the record set");
    pop.iter().filter(|r| r.n_bright == 0 || r.n_bright == num_atoms).count() as f64 / pop.len() as f64
}

/// Shot records as CSV: `shot, ensemble_id, phi_c (rad; empty for
/// population shots), outcome_bits (atom 0 first), n (bright count),
/// leaked (flags, atom 0 first)`.
pub fn shot_records_to_csv(records: &[ShotRecord]) -> String {
    let mut out = String::from("shot,ensemble_id,phi_c_rad,outcome_bits,n,leaked\n");
    for r in records {
        let bits: String = r.outcomes.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let leaked: String = r.leaked.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let phi = r.phi_c.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{},{}", r.shot, r.ensemble_id, phi, bits, r.n_bright, leaked);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::RABI_RAD;
    use crate::grape::{self, GrapeConfig};
    use crate::register;
    use rand::Rng;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn random_pulse(steps: usize, seed: u64) -> PhasePulse {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let phases = (0..steps).map(|_| rng.gen_range(-PI..PI)).collect();
        PhasePulse::new(6.5e-9, phases, RABI_RAD, 15e-9)
    }

    /// One shared Bell-grade pulse for the slower pipeline tests.
    fn bell_pulse() -> &'static PhasePulse {
        static PULSE: OnceLock<PhasePulse> = OnceLock::new();
        PULSE.get_or_init(|| {
            let mut cfg = GrapeConfig::new(2, RABI_RAD);
            cfg.restarts = 2;
            cfg.max_iters = 300;
            grape::grape_optimize(50, &cfg).unwrap().record.pulse
        })
    }

    #[test]
    fn clock_rotations_match_register() {
        let n = 3;
        let reg = register::EnsembleState::ground(n).apply_global_x(0.7).apply_global_z(1.1);
        let multi = MultiState::ground(n).unwrap().apply_clock_x(0.7).apply_clock_z(1.1);
        let back = multi.to_register();
        assert_eq!(back.norm_deficit(), 0.0);
        for (a, b) in reg.amplitudes().iter().zip(back.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_rabi_leaves_state_unchanged() {
        let n = 2;
        let state = MultiState::ground(n).unwrap().apply_clock_x(FRAC_PI_2);
        let pulse = random_pulse(20, 1);
        let drive = DriveParams { rabi: vec![0.0; n], detuning: vec![0.0; n] };
        let arr = crate::geometry::standard_arrangement(2).unwrap();
        let out = evolve_full(&state, &pulse, Some(&arr), BlockadeMode::finite(), &drive).unwrap();
        for (a, b) in state.amplitudes().iter().zip(out.amplitudes()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    // Oracle: the two-level sector model. Starting from a basis state with
    // n excitations, projected evolution must reproduce the sector return
    // and W amplitudes.
    #[test]
    fn projected_mode_matches_sector_model() {
        let pulse = random_pulse(30, 2);
        for (n_atoms, bits) in [(2usize, 0b11usize), (3, 0b101), (4, 0b1110)] {
            let n_exc = bits.count_ones();
            let mut amps = vec![C64::ZERO; 1 << n_atoms];
            amps[bits] = C64::ONE;
            let reg = register::EnsembleState::from_amplitudes(n_atoms, amps, 0.0).unwrap();
            let init = MultiState::from_register(&reg).unwrap();
            let drive = DriveParams::uniform(n_atoms, pulse.rabi);
            let out = evolve_full(&init, &pulse, None, BlockadeMode::Projected, &drive).unwrap();

            let sector = grape::SectorModel::new(n_exc, pulse.rabi, 0.0);
            let (a_psi, a_w) = grape::sector_propagate(&pulse, &sector).unwrap();

            let idx: usize = (0..n_atoms).filter(|j| bits >> j & 1 == 1).map(pow3).sum();
            assert!((out.amplitudes()[idx] - a_psi).norm() < 1e-8, "n={n_exc}");
            let mut w_amp = C64::ZERO;
            for j in (0..n_atoms).filter(|j| bits >> j & 1 == 1) {
                w_amp += out.amplitudes()[idx + pow3(j)];
            }
            w_amp /= (n_exc as f64).sqrt();
            assert!((w_amp - a_w).norm() < 1e-8, "n={n_exc}");
        }
    }

    // Strong finite interactions converge to the projected limit.
    #[test]
    fn strong_blockade_matches_projected_pipeline() {
        let pulse = bell_pulse().clone();
        let mut arr = crate::geometry::standard_arrangement(2).unwrap();
        let r = arr.max_pair_distance();
        arr.c6 = 1e6 * RABI_RAD * r.powi(6); // V = 1e6 rabi at the pair spacing

        let alpha = calibrate_alpha(&pulse, None, BlockadeMode::Projected, 2).unwrap();
        let ideal = prepare_ghz_state(&pulse, None, BlockadeMode::Projected, 2, alpha).unwrap();
        let finite = prepare_ghz_state(&pulse, Some(&arr), BlockadeMode::finite(), 2, alpha).unwrap();
        let f_ideal = ideal.ghz_fidelity().unwrap();
        let f_finite = finite.ghz_fidelity().unwrap();
        assert!((f_ideal - f_finite).abs() < 1e-4, "{f_ideal} vs {f_finite}");
        assert!(f_ideal > 0.999);
    }

    #[test]
    fn ideal_experiment_has_unit_contrast_and_is_deterministic() {
        let pulse = bell_pulse().clone();
        let alpha = calibrate_alpha(&pulse, None, BlockadeMode::Projected, 2).unwrap();
        let exp = GhzExperiment {
            pulse,
            arrangement: None,
            mode: BlockadeMode::Projected,
            noise: NoiseConfig::ideal(),
            num_atoms: 2,
            alpha_c: alpha,
            seed: 11,
        };
        // Scan the parity oscillation and check both the parity contrast and
        // the population shots.
        let mut readouts: Vec<Readout> =
            (0..8).map(|k| Readout::Parity(2.0 * PI * k as f64 / 16.0)).collect();
        readouts.push(Readout::Population);
        let shots = 400;
        let records = simulate_ghz_experiment(&exp, &readouts, shots).unwrap();
        assert_eq!(records.len(), readouts.len() * shots);

        let table = parity_by_phase(&records);
        let max_parity = table.iter().map(|(_, p, _)| p.abs()).fold(0.0, f64::max);
        assert!(max_parity > 1.0 - 3.0 / (shots as f64).sqrt(), "max parity {max_parity}");
        let pops = ghz_population_fraction(&records, 2);
        assert!(pops > 1.0 - 3.0 / (shots as f64).sqrt(), "p0+pN = {pops}");

        let again = simulate_ghz_experiment(&exp, &readouts, shots).unwrap();
        assert_eq!(records, again);
    }

    #[test]
    fn blockade_violation_small_for_bell_geometry() {
        let pulse = bell_pulse().clone();
        let arr = crate::geometry::standard_arrangement(2).unwrap();
        let drive = DriveParams::uniform(2, pulse.rabi);
        let init = MultiState::ground(2).unwrap().apply_clock_x(FRAC_PI_2);
        let out = evolve_full(&init, &pulse, Some(&arr), BlockadeMode::finite(), &drive).unwrap();
        let violation = out.rydberg_weight_at_least(2);
        assert!(violation < 1e-4, "violation = {violation:.2e}");
    }

    // Decay-only trajectories should deplete the GHZ populations by an
    // amount consistent with the decay-limited fidelity bound.
    #[test]
    fn decay_trajectories_consistent_with_fidelity_bound() {
        let pulse = bell_pulse().clone();
        let alpha = calibrate_alpha(&pulse, None, BlockadeMode::Projected, 2).unwrap();
        let gamma_dark = 1.0 / 51e-6;
        let gamma_bright = 1.0 / 86e-6;
        let noise = NoiseConfig { gamma_dark, gamma_bright, ..NoiseConfig::ideal() };
        let exp = GhzExperiment {
            pulse: pulse.clone(),
            arrangement: None,
            mode: BlockadeMode::Projected,
            noise,
            num_atoms: 2,
            alpha_c: alpha,
            seed: 5,
        };
        let shots = 6000;
        let records = simulate_ghz_experiment(&exp, &[Readout::Population], shots).unwrap();
        let extreme = ghz_population_fraction(&records, 2);

        let gamma = gamma_dark + gamma_bright;
        let f_decay = grape::decay_limited_fidelity(2, &pulse, gamma).unwrap();
        let f_ideal = grape::decay_limited_fidelity(2, &pulse, 0.0).unwrap();
        let deficit = f_ideal - f_decay;
        let sigma = (extreme.max(0.01) * (1.0 - extreme).max(0.01) / shots as f64).sqrt();
        // Population loss tracks the fidelity deficit to within a factor-2
        // band plus counting noise.
        assert!(
            1.0 - extreme > 0.5 * deficit - 3.0 * sigma && 1.0 - extreme < 2.0 * deficit + 3.0 * sigma,
            "population deficit {:.4} vs fidelity deficit {:.4}",
            1.0 - extreme,
            deficit
        );
    }

    #[test]
    fn shot_csv_format() {
        let record = ShotRecord {
            shot: 3,
            ensemble_id: 1,
            phi_c: Some(0.5),
            outcomes: vec![true, false, true],
            n_bright: 2,
            leaked: vec![false, false, true],
        };
        let pop_record = ShotRecord { shot: 4, phi_c: None, ..record.clone() };
        let csv = shot_records_to_csv(&[record, pop_record]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "shot,ensemble_id,phi_c_rad,outcome_bits,n,leaked");
        assert_eq!(lines.next().unwrap(), "3,1,0.5,101,2,001");
        assert_eq!(lines.next().unwrap(), "4,1,,101,2,001");
    }

    #[test]
    fn dimension_limits_enforced() {
        assert!(MultiState::ground(11).is_err());
        assert!(MultiState::ground(0).is_err());
    }
}
