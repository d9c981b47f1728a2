//! Weighted least-squares fits: the fixed-frequency parity oscillation and
//! the leakage-correction population fit.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("design matrix is rank-deficient (degenerate phase sampling)")]
    RankDeficient,
}

/// Result of fitting `C sin[N (phi - phi0)] + y0` at fixed frequency `N`.
#[derive(Debug, Clone)]
pub struct ParityFit {
    pub n: u32,
    pub contrast: f64,
    pub phase_offset: f64,
    pub offset: f64,
    pub contrast_err: f64,
    pub phase_err: f64,
    pub offset_err: f64,
    /// Covariance of the linear parameters (a, b, y0) with
    /// `a sin(N phi) + b cos(N phi) + y0`.
    pub covariance: [[f64; 3]; 3],
}

impl ParityFit {
    pub fn evaluate(&self, phi: f64) -> f64 {
        self.contrast * (self.n as f64 * (phi - self.phase_offset)).sin() + self.offset
    }
}

/// Weighted least squares for the parity oscillation. `data` holds
/// `(phi_c, parity mean, sigma)` triples; nonpositive sigmas switch the fit
/// to unit weights with the covariance scaled by the reduced chi-square.
pub fn fit_parity(data: &[(f64, f64, f64)], n: u32) -> Result<ParityFit, FitError> {
    if data.len() < 4 {
        return Err(FitError::TooFewPoints { needed: 4, got: data.len() });
    }
    let freq = n as f64;
    let known_sigma = data.iter().all(|&(_, _, s)| s > 0.0);
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(phi, y, sigma) in data {
        let w = if known_sigma { 1.0 / (sigma * sigma) } else { 1.0 };
        let row = Vector3::new((freq * phi).sin(), (freq * phi).cos(), 1.0);
        ata += w * row * row.transpose();
        atb += w * y * row;
    }
    let inv = ata.try_inverse().ok_or(FitError::RankDeficient)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(FitError::RankDeficient);
    }
    let params = inv * atb;
    let (a, b, y0) = (params[0], params[1], params[2]);

    let mut cov = inv;
    if !known_sigma {
        let dof = (data.len() as f64 - 3.0).max(1.0);
        let chi2: f64 = data
            .iter()
            .map(|&(phi, y, _)| {
                let model = a * (freq * phi).sin() + b * (freq * phi).cos() + y0;
                (y - model) * (y - model)
            })
            .sum();
        cov *= chi2 / dof;
    }

    let contrast = a.hypot(b);
    // a = C cos(N phi0), b = -C sin(N phi0).
    let phase_offset = (-b).atan2(a) / freq;
    let c2 = contrast * contrast;
    let contrast_err = if contrast > 0.0 {
        ((a * a * cov[(0, 0)] + b * b * cov[(1, 1)] + 2.0 * a * b * cov[(0, 1)]) / c2).max(0.0).sqrt()
    } else {
        cov[(0, 0)].max(cov[(1, 1)]).sqrt()
    };
    let phase_err = if contrast > 0.0 {
        ((b * b * cov[(0, 0)] + a * a * cov[(1, 1)] - 2.0 * a * b * cov[(0, 1)])
            / (c2 * c2 * freq * freq))
            .max(0.0)
            .sqrt()
    } else {
        f64::INFINITY
    };
    Ok(ParityFit {
        n,
        contrast,
        phase_offset,
        offset: y0,
        contrast_err,
        phase_err,
        offset_err: cov[(2, 2)].max(0.0).sqrt(),
        covariance: [
            [cov[(0, 0)], cov[(0, 1)], cov[(0, 2)]],
            [cov[(1, 0)], cov[(1, 1)], cov[(1, 2)]],
            [cov[(2, 0)], cov[(2, 1)], cov[(2, 2)]],
        ],
    })
}

/// Result of the leakage-correction fit
/// `p0 + pN = [C - A sin^2((alpha_c - alpha)/2)] f(alpha_c - alpha) + y`.
#[derive(Debug, Clone)]
pub struct LeakageFit {
    pub c: f64,
    pub a: f64,
    pub alpha: f64,
    pub y: f64,
    pub a_err: f64,
    pub residual: f64,
}

impl LeakageFit {
    /// The published correction rule: subtract `|A|` from the populations.
    pub fn corrected_populations(&self, p0_plus_pn: f64) -> f64 {
        p0_plus_pn - self.a.abs()
    }
}

/// Fit the population oscillation against the ideal-circuit shape `f`
/// (supplied by the exact register simulation, normalized to f(0) = 1).
/// For fixed `alpha` the model is linear in (C, A, y), so the nonlinear
/// part reduces to a profile scan over `alpha` refined by golden section.
pub fn leakage_fit(
    data: &[(f64, f64, f64)],
    shape: impl Fn(f64) -> f64,
) -> Result<LeakageFit, FitError> {
    if data.len() < 4 {
        return Err(FitError::TooFewPoints { needed: 4, got: data.len() });
    }
    let solve_at = |alpha: f64| -> Option<(f64, [f64; 3], Matrix3<f64>)> {
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for &(ac, y, sigma) in data {
            let w = if sigma > 0.0 { 1.0 / (sigma * sigma) } else { 1.0 };
            let x = ac - alpha;
            let f = shape(x);
            let row = Vector3::new(f, -(x / 2.0).sin().powi(2) * f, 1.0);
            ata += w * row * row.transpose();
            atb += w * y * row;
        }
        let inv = ata.try_inverse()?;
        let params = inv * atb;
        let ssr: f64 = data
            .iter()
            .map(|&(ac, y, sigma)| {
                let w = if sigma > 0.0 { 1.0 / (sigma * sigma) } else { 1.0 };
                let x = ac - alpha;
                let f = shape(x);
                let model = params[0] * f - params[1] * (x / 2.0).sin().powi(2) * f + params[2];
                w * (y - model) * (y - model)
            })
            .sum();
        Some((ssr, [params[0], params[1], params[2]], inv))
    };

    // The population oscillation is pi-periodic in alpha.
    const GRID: usize = 64;
    let mut best = None;
    for k in 0..GRID {
        let alpha = -PI / 2.0 + PI * k as f64 / GRID as f64;
        if let Some((ssr, ..)) = solve_at(alpha) {
            if best.map(|(s, _)| ssr < s).unwrap_or(true) {
                best = Some((ssr, alpha));
            }
        }
    }
    let (_, alpha0) = best.ok_or(FitError::RankDeficient)?;
    let spacing = PI / GRID as f64;
    let (mut lo, mut hi) = (alpha0 - spacing, alpha0 + spacing);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let eval = |alpha: f64| solve_at(alpha).map(|(ssr, ..)| ssr).unwrap_or(f64::INFINITY);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    while hi - lo > 1e-9 {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1);
        }
    }
    let alpha = (lo + hi) / 2.0;
    let (ssr, params, cov) = solve_at(alpha).ok_or(FitError::RankDeficient)?;
    let known_sigma = data.iter().all(|&(_, _, s)| s > 0.0);
    let scale = if known_sigma { 1.0 } else { ssr / (data.len() as f64 - 4.0).max(1.0) };
    Ok(LeakageFit {
        c: params[0],
        a: params[1],
        alpha,
        y: params[2],
        a_err: (cov[(1, 1)] * scale).max(0.0).sqrt(),
        residual: ssr,
    })
}
