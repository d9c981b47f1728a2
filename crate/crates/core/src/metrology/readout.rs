//! Detection-error model: the measurement matrix connecting true and
//! observed excitation-count distributions, and its constrained inversion.

use serde::{Deserialize, Serialize};

/// Independent per-atom misidentification probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    /// Probability of reading a dark atom as bright.
    pub p_dark_to_bright: f64,
    /// Probability of reading a bright atom as dark.
    pub p_bright_to_dark: f64,
    pub num_atoms: u32,
}

impl MeasurementModel {
    pub fn new(p_dark_to_bright: f64, p_bright_to_dark: f64, num_atoms: u32) -> Self {
        assert!((0.0..=1.0).contains(&p_dark_to_bright));
        assert!((0.0..=1.0).contains(&p_bright_to_dark));
        assert!(num_atoms >= 1);
        Self { p_dark_to_bright, p_bright_to_dark, num_atoms }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Column-stochastic matrix `M[m][n]`: probability of observing `m` bright
/// atoms given `n` truly bright out of `N`, with independent flip errors.
///
/// For `m <= n` the bright-to-dark flips `k` run from `n - m` up to
/// `min(n, N - m)` with `k - n + m` compensating dark-to-bright flips; for
/// `m > n` the roles reverse.
pub fn measurement_matrix(model: &MeasurementModel) -> Vec<Vec<f64>> {
    let n_atoms = model.num_atoms;
    let p_db = model.p_dark_to_bright;
    let p_bd = model.p_bright_to_dark;
    let size = (n_atoms + 1) as usize;
    let mut m = vec![vec![0.0; size]; size];
    for n in 0..=n_atoms {
        for obs in 0..=n_atoms {
            let value = if obs <= n {
                let mut sum = 0.0;
                for k in (n - obs)..=n.min(n_atoms - obs) {
                    sum += binomial(n, k)
                        * p_bd.powi(k as i32)
                        * (1.0 - p_bd).powi((n - k) as i32)
                        * binomial(n_atoms - n, k - n + obs)
                        * p_db.powi((k - n + obs) as i32)
                        * (1.0 - p_db).powi((n_atoms - k - obs) as i32);
                }
                sum
            } else {
                let mut sum = 0.0;
                for k in (obs - n)..=(n_atoms - n).min(obs) {
                    sum += binomial(n_atoms - n, k)
                        * p_db.powi(k as i32)
                        * (1.0 - p_db).powi((n_atoms - n - k) as i32)
                        * binomial(n, k - obs + n)
                        * p_bd.powi((k - obs + n) as i32)
                        * (1.0 - p_bd).powi((obs - k) as i32);
                }
                sum
            };
            m[obs as usize][n as usize] = value;
        }
    }
    m
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    x.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Recover the true count distribution by minimizing
/// `sum_m |p_raw[m] - sum_n M[m][n] p[n]|^2` over the probability simplex
/// (projected gradient descent; the problem is a small convex QP).
pub fn correct_populations(p_raw: &[f64], matrix: &[Vec<f64>]) -> Vec<f64> {
    let size = p_raw.len();
    assert_eq!(matrix.len(), size);
    // Lipschitz constant of the gradient: bounded by the squared Frobenius
    // norm of M.
    let lipschitz: f64 = matrix.iter().flatten().map(|v| v * v).sum::<f64>().max(1e-12);
    let step = 1.0 / lipschitz;

    let mut x = project_simplex(p_raw);
    let mut grad = vec![0.0; size];
    for _ in 0..20_000 {
        let residual: Vec<f64> = (0..size)
            .map(|m| matrix[m].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - p_raw[m])
            .collect();
        for (n, g) in grad.iter_mut().enumerate() {
            *g = (0..size).map(|m| matrix[m][n] * residual[m]).sum();
        }
        let proposal: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
        let next = project_simplex(&proposal);
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
        x = next;
        if delta < 1e-26 {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_when_error_free() {
        let m = measurement_matrix(&MeasurementModel::new(0.0, 0.0, 5));
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(m[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn columns_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=9u32 {
            let model = MeasurementModel::new(rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3), n);
            let m = measurement_matrix(&model);
            for col in 0..=n as usize {
                let sum: f64 = (0..=n as usize).map(|row| m[row][col]).sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    // Oracle: exhaustive enumeration over all 2^N true bitstrings and 2^N
    // flip patterns.
    #[test]
    fn matches_bitstring_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n_atoms in 1..=4u32 {
            let p_db = rng.gen_range(0.0..0.35);
            let p_bd = rng.gen_range(0.0..0.35);
            let fast = measurement_matrix(&MeasurementModel::new(p_db, p_bd, n_atoms));
            let size = (n_atoms + 1) as usize;
            let mut brute = vec![vec![0.0; size]; size];
            for truth in 0..1u32 << n_atoms {
                let n_true = truth.count_ones() as usize;
                // Weight by how many bitstrings share this excitation count:
                // symmetric errors make every representative equivalent, so
                // normalize per column below.
                for flips in 0..1u32 << n_atoms {
                    let mut prob = 1.0;
                    let mut observed = 0usize;
                    for atom in 0..n_atoms {
                        let bright = truth >> atom & 1 == 1;
                        let flip = flips >> atom & 1 == 1;
                        prob *= match (bright, flip) {
                            (true, true) => p_bd,
                            (true, false) => 1.0 - p_bd,
                            (false, true) => p_db,
                            (false, false) => 1.0 - p_db,
                        };
                        if bright != flip {
                            observed += 1;
                        }
                    }
                    brute[observed][n_true] += prob / binomial(n_atoms, n_true as u32);
                }
            }
            for row in 0..size {
                for col in 0..size {
                    assert_abs_diff_eq!(fast[row][col], brute[row][col], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn correction_recovers_consistent_data() {
        let model = MeasurementModel::new(0.009, 0.003, 6);
        let m = measurement_matrix(&model);
        let p_true = [0.42, 0.02, 0.03, 0.02, 0.02, 0.03, 0.46];
        let p_raw: Vec<f64> = (0..7)
            .map(|row| m[row].iter().zip(&p_true).map(|(a, b)| a * b).sum())
            .collect();
        let recovered = correct_populations(&p_raw, &m);
        for (got, want) in recovered.iter().zip(&p_true) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn identity_model_is_transparent() {
        let m = measurement_matrix(&MeasurementModel::new(0.0, 0.0, 4));
        let p = [0.5, 0.1, 0.0, 0.1, 0.3];
        let out = correct_populations(&p, &m);
        for (got, want) in out.iter().zip(&p) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }

    // Oracle: the constrained minimizer beats 1000 random simplex probes.
    #[test]
    fn correction_is_optimal_among_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = MeasurementModel::new(0.05, 0.04, 4);
        let m = measurement_matrix(&model);
        let mut p_raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = p_raw.iter().sum();
        p_raw.iter_mut().for_each(|v| *v /= total);
        // Small perturbation so the system is inconsistent.
        p_raw[0] += 0.02;
        p_raw[1] -= 0.02;

        let objective = |p: &[f64]| -> f64 {
            (0..5)
                .map(|row| {
                    let model_val: f64 = m[row].iter().zip(p).map(|(a, b)| a * b).sum();
                    (model_val - p_raw[row]).powi(2)
                })
                .sum()
        };
        let solution = correct_populations(&p_raw, &m);
        let best = objective(&solution);
        assert_abs_diff_eq!(solution.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        for _ in 0..1000 {
            let mut probe: Vec<f64> = (0..5).map(|_| -(rng.gen::<f64>().max(1e-12)).ln()).collect();
            let total: f64 = probe.iter().sum();
            probe.iter_mut().for_each(|v| *v /= total);
            assert!(objective(&probe) >= best - 1e-12);
        }
    }

    // Round trip: correction after the forward matrix is the identity on
    // exact data for every register size.
    #[test]
    fn round_trip_identity_all_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=9u32 {
            let model = MeasurementModel::new(0.009, 0.003, n);
            let m = measurement_matrix(&model);
            let size = (n + 1) as usize;
            let mut p: Vec<f64> = (0..size).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= total);
            let raw: Vec<f64> =
                (0..size).map(|row| m[row].iter().zip(&p).map(|(a, b)| a * b).sum()).collect();
            let rec = correct_populations(&raw, &m);
            for (got, want) in rec.iter().zip(&p) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-6);
            }
        }
    }
}
