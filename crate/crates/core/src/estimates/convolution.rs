//! Monte Carlo for the Brownian convolution bound
//! `E ∫₀ᵀ (∫₀ᵗ |β(t) − β(s)|^{−α} |f(s)| ds)² dt ≲ T^{2−α} E ∫₀ᵀ |f|²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay_exponent_with, EstimateReport, FitOptions};
use crate::error::{LabError, Result};
use crate::stochastic::{uniform_times, BrownianPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionSetup {
    pub alpha: f64,
    pub t_grid: Vec<f64>,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvolutionOutcome {
    pub alpha: f64,
    /// `(T, LHS(T))`.
    pub lhs: Vec<(f64, f64)>,
    /// `LHS(T) / (T^{2−α} E∫₀ᵀ|f|²)`.
    pub ratios: Vec<f64>,
    pub ratio_spread: f64,
    pub report: EstimateReport,
}

/// One path's contribution to the LHS and to `∫₀ᵀ |f|²`.
///
/// The inner integral is a left-endpoint sum over `s_j < t_k`, the outer a
/// right-endpoint sum over `t_k`, so the singular diagonal is never sampled.
fn path_terms(path: &BrownianPath, alpha: f64, f: &(dyn Fn(f64) -> f64 + Sync)) -> (f64, f64) {
    let t = path.times();
    let b = path.values();
    let n = path.n_steps();
    let dt = t[n] / n as f64;
    let fabs: Vec<f64> = t.iter().map(|&s| f(s).abs()).collect();
    let mut lhs = 0.0;
    let mut energy = 0.0;
    for k in 1..=n {
        let inner: f64 = (0..k)
            .map(|j| {
                let weight = if alpha == 0.0 { 1.0 } else { (b[k] - b[j]).abs().powf(-alpha) };
                weight * fabs[j]
            })
            .sum::<f64>()
            * dt;
        lhs += inner * inner * dt;
        energy += fabs[k] * fabs[k] * dt;
    }
    (lhs, energy)
}

/// Estimates the LHS on every window length in `t_grid` with independent
/// path streams per window, then fits its exponent in `T`.
pub fn convolution_lemma_experiment(
    setup: &ConvolutionSetup,
    f: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<ConvolutionOutcome> {
    let alpha = setup.alpha;
    if !(0.0..1.0).contains(&alpha) {
        return Err(LabError::Domain(format!("α must lie in [0, 1), got {alpha}")));
    }
    if setup.n_steps == 0 || setup.n_paths == 0 {
        return Err(LabError::Domain("n_steps and n_paths must be positive".into()));
    }
    if setup.t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(LabError::Domain("window lengths must be positive".into()));
    }
    let mut lhs = Vec::with_capacity(setup.t_grid.len());
    let mut ratios = Vec::with_capacity(setup.t_grid.len());
    for (ti, &big_t) in setup.t_grid.iter().enumerate() {
        let times = uniform_times(big_t, setup.n_steps);
        let offset = (ti * setup.n_paths) as u64;
        let terms = (0..setup.n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let path = BrownianPath::sample(&times, setup.seed, offset + i)?;
                Ok(path_terms(&path, alpha, f))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = setup.n_paths as f64;
        let mean_lhs = terms.iter().map(|t| t.0).sum::<f64>() / n;
        let mean_energy = terms.iter().map(|t| t.1).sum::<f64>() / n;
        lhs.push((big_t, mean_lhs));
        ratios.push(mean_lhs / (big_t.powf(2.0 - alpha) * mean_energy));
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let report = fit_decay_exponent_with(&lhs, setup.n_paths, setup.seed, &FitOptions::window_grid())?;
    Ok(ConvolutionOutcome {
        alpha,
        lhs,
        ratios,
        ratio_spread: max / min,
        report,
    })
}

/// `T_k = 0.25 · 2^{k/2}`, `k = 0..=8`: nine window lengths on `[0.25, 4]`.
pub fn default_window_grid() -> Vec<f64> {
    (0..=8).map(|k| 0.25 * 2f64.powf(k as f64 / 2.0)).collect()
}
