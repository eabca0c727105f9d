//! Sup-norm decay of `e^{−iβ(t)H} P_ac u0` along Brownian paths, both
//! pathwise against `|β(t)|` and in `L^p(Ω)` against `t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay_exponent, EstimateReport};
use super::{resonance_warning, Warning};
use crate::error::{LabError, Result};
use crate::quadrature::simpson;
use crate::spectral::{ActiveBasis, DiscreteHamiltonian};
use crate::stochastic::BrownianEnsemble;
use crate::Complex64;

/// Relative coefficient size below which eigenmodes are dropped before
/// propagating; far below the accuracy of any sup-norm we report.
const MODE_THRESHOLD: f64 = 1e-12;
/// Paths propagated per GEMM.
const PATH_BATCH: usize = 16;

/// Range of `|β|` over which the discrete propagator is trusted to show the
/// continuum decay.
///
/// Below `min_scale · w²` (with `w²` the position variance of `|u0|²`) the
/// data has not yet spread past its own width, so the sup norm is flat.
/// Above `max_scale · L / κ` (with `κ²` the mean kinetic energy of `u0`)
/// the fastest part of the wave packet reaches the Dirichlet walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensorRule {
    pub min_scale: f64,
    pub max_scale: f64,
}

impl Default for CensorRule {
    fn default() -> Self {
        Self {
            min_scale: 4.0,
            max_scale: 0.25,
        }
    }
}

impl CensorRule {
    pub fn window(&self, h: &DiscreteHamiltonian, u0: &[Complex64]) -> Result<(f64, f64)> {
        let xs = h.grid().points();
        let dx = h.grid().spacing();
        let mass: f64 = u0.iter().map(|z| z.norm_sqr()).sum();
        if !(mass > 0.0) {
            return Err(LabError::Domain("initial state vanishes".into()));
        }
        let mean: f64 = u0.iter().zip(&xs).map(|(z, x)| z.norm_sqr() * x).sum::<f64>() / mass;
        let var: f64 = u0
            .iter()
            .zip(&xs)
            .map(|(z, x)| z.norm_sqr() * (x - mean).powi(2))
            .sum::<f64>()
            / mass;
        let kinetic: f64 = u0.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>() / (dx * dx) / mass;
        let lo = self.min_scale * var;
        let hi = self.max_scale * h.grid().half_width() / kinetic.sqrt();
        if !(lo < hi) {
            return Err(LabError::Resolution(format!(
                "empty |β| window [{lo:.3e}, {hi:.3e}]; enlarge the box or narrow u0"
            )));
        }
        Ok((lo, hi))
    }
}

fn sup_norm(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sup_norms_at(basis: &ActiveBasis, taus: &[f64]) -> Result<Vec<f64>> {
    Ok(basis.propagate_many(taus)?.iter().map(|u| sup_norm(u)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersiveSample {
    pub path: u64,
    pub t: f64,
    pub beta: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersiveOutcome {
    pub samples: Vec<DispersiveSample>,
    pub beta_window: (f64, f64),
    pub n_censored: usize,
    pub max_sup_norm: f64,
    pub report: Option<EstimateReport>,
    pub warnings: Vec<Warning>,
}

/// Fits `log ‖e^{−iβ(t)H}(P_ac)u0‖_∞` against `log |β(t)|` over every
/// (path, t > 0) sample whose `|β|` lies in the censoring window.
pub fn dispersive_experiment(
    h: &DiscreteHamiltonian,
    ensemble: &BrownianEnsemble,
    u0: &[Complex64],
    project: bool,
    rule: &CensorRule,
) -> Result<DispersiveOutcome> {
    let mut warnings: Vec<Warning> = resonance_warning(h)?.into_iter().collect();
    let start = if project { h.project_ac(u0)? } else { u0.to_vec() };
    let beta_window = rule.window(h, u0)?;
    let (lo, hi) = beta_window;
    let basis = h.active_basis(&start, MODE_THRESHOLD)?;

    let per_path = ensemble
        .paths
        .par_iter()
        .map(|p| {
            let kept: Vec<(f64, f64)> = p
                .times()
                .iter()
                .zip(p.values())
                .skip(1)
                .filter(|(_, b)| (lo..=hi).contains(&b.abs()))
                .map(|(t, b)| (*t, *b))
                .collect();
            let censored = p.n_steps() - kept.len();
            let taus: Vec<f64> = kept.iter().map(|s| s.1).collect();
            let sups = sup_norms_at(&basis, &taus)?;
            let samples: Vec<DispersiveSample> = kept
                .iter()
                .zip(sups)
                .map(|(&(t, beta), s)| DispersiveSample {
                    path: p.index(),
                    t,
                    beta,
                    sup_norm: s,
                })
                .collect();
            Ok((samples, censored))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::new();
    let mut n_censored = 0;
    for (s, c) in per_path {
        samples.extend(s);
        n_censored += c;
    }
    let max_sup_norm = samples.iter().map(|s| s.sup_norm).fold(0.0, f64::max);
    let scale = sup_norm(u0);
    let report = if max_sup_norm <= 1e-8 * scale.max(1.0) {
        warnings.push(Warning::numerical(
            "propagated state vanishes identically; no decay fit performed",
        ));
        None
    } else {
        let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.beta.abs(), s.sup_norm)).collect();
        Some(fit_decay_exponent(&pairs, ensemble.paths.len(), ensemble.seed)?)
    };
    Ok(DispersiveOutcome {
        samples,
        beta_window,
        n_censored,
        max_sup_norm,
        report,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpectationOutcome {
    pub p: f64,
    /// `(t, (E v(t)^p)^{1/p})`.
    pub per_time: Vec<(f64, f64)>,
    /// `(E|β(t)|^{−p/2})^{1/p}` from quadrature, when applicable.
    pub predicted: Option<Vec<f64>>,
    pub report: EstimateReport,
    pub warnings: Vec<Warning>,
}

fn check_moment_order(p: f64) -> Result<()> {
    if (1.0..2.0).contains(&p) {
        Ok(())
    } else {
        Err(LabError::Domain(format!(
            "moment order must lie in [1, 2), got {p}; E|β(t)|^(-p/2) diverges for p ≥ 2"
        )))
    }
}

fn common_times(ensemble: &BrownianEnsemble) -> Result<Vec<f64>> {
    let first = ensemble
        .paths
        .first()
        .ok_or_else(|| LabError::Domain("ensemble has no paths".into()))?;
    if ensemble.paths.iter().any(|p| p.times() != first.times()) {
        return Err(LabError::Contract("paths are sampled at different times".into()));
    }
    Ok(first.times()[1..].to_vec())
}

fn moment_curve(per_path: &[Vec<f64>], p: f64) -> Vec<f64> {
    let n = per_path.len() as f64;
    let n_t = per_path[0].len();
    (0..n_t)
        .map(|k| (per_path.iter().map(|v| v[k].powf(p)).sum::<f64>() / n).powf(1.0 / p))
        .collect()
}

/// `(E‖e^{−iβ(t)H}(P_ac)u0‖_∞^p)^{1/p}` at the ensemble's sample times,
/// with its power-law fit in `t`.
pub fn expectation_decay_experiment(
    h: &DiscreteHamiltonian,
    ensemble: &BrownianEnsemble,
    u0: &[Complex64],
    p: f64,
    project: bool,
) -> Result<ExpectationOutcome> {
    check_moment_order(p)?;
    let warnings: Vec<Warning> = resonance_warning(h)?.into_iter().collect();
    let times = common_times(ensemble)?;
    let start = if project { h.project_ac(u0)? } else { u0.to_vec() };
    let basis = h.active_basis(&start, MODE_THRESHOLD)?;
    let chunks = ensemble
        .paths
        .par_chunks(PATH_BATCH)
        .map(|chunk| {
            let taus: Vec<f64> = chunk.iter().flat_map(|p| p.values()[1..].to_vec()).collect();
            let sups = sup_norms_at(&basis, &taus)?;
            Ok(sups.chunks(times.len()).map(|c| c.to_vec()).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let per_path: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    let curve = moment_curve(&per_path, p);
    let per_time: Vec<(f64, f64)> = times.iter().copied().zip(curve).collect();
    let report = fit_decay_exponent(&per_time, ensemble.paths.len(), ensemble.seed)?;
    Ok(ExpectationOutcome {
        p,
        per_time,
        predicted: None,
        report,
        warnings,
    })
}

/// `E|Z|^{−q}` for a standard normal `Z` and `0 ≤ q < 1`, by quadrature
/// after the substitution `x = u^m`, `m = 1/(1 − q)`, which removes the
/// singularity at the origin.
pub fn abs_normal_moment(q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(LabError::Domain(format!("E|Z|^(-q) needs 0 ≤ q < 1, got {q}")));
    }
    let m = 1.0 / (1.0 - q);
    let upper = 40f64.powf(1.0 / m);
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(2.0 * m * simpson(|u| phi(u.powf(m)), 0.0, upper, 20_000))
}

/// The same moment curve with `v(t) = |β(t)|^{−1/2}` in place of the
/// propagated sup norm, together with its exact value
/// `t^{−1/4}(E|Z|^{−p/2})^{1/p}`.
pub fn abscissa_only_decay(ensemble: &BrownianEnsemble, p: f64) -> Result<ExpectationOutcome> {
    check_moment_order(p)?;
    let times = common_times(ensemble)?;
    let per_path: Vec<Vec<f64>> = ensemble
        .paths
        .iter()
        .map(|path| path.values()[1..].iter().map(|b| b.abs().powf(-0.5)).collect())
        .collect();
    let curve = moment_curve(&per_path, p);
    let constant = abs_normal_moment(p / 2.0)?.powf(1.0 / p);
    let predicted = times.iter().map(|t| constant * t.powf(-0.25)).collect();
    let per_time: Vec<(f64, f64)> = times.iter().copied().zip(curve).collect();
    let report = fit_decay_exponent(&per_time, ensemble.paths.len(), ensemble.seed)?;
    Ok(ExpectationOutcome {
        p,
        per_time,
        predicted: Some(predicted),
        report,
        warnings: Vec::new(),
    })
}

/// `n` log-spaced times in `[t_min, t_max]`.
pub fn log_times(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t_min];
    }
    let r = (t_max / t_min).ln() / (n - 1) as f64;
    (0..n).map(|i| t_min * (r * i as f64).exp()).collect()
}
