//! Strong convergence of Euler–Maruyama for `du = −½H²u dt − iHu dβ`
//! towards the exact solution `e^{−iβ(T)H}u0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay_exponent_with, EstimateReport, FitOptions};
use super::Warning;
use crate::error::{LabError, Result};
use crate::spectral::DiscreteHamiltonian;
use crate::stochastic::{euler_maruyama_modes, uniform_times, BrownianPath, ACTIVE_MODE_THRESHOLD};
use crate::Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeSetup {
    pub horizon: f64,
    /// Steps of the reference path; every level must divide it.
    pub fine_steps: usize,
    /// Euler step counts to compare.
    pub levels: Vec<usize>,
    pub n_paths: usize,
    pub seed: u64,
}

impl SdeSetup {
    /// Levels `T/2^6 … T/2^12` on a `2^12`-step reference path.
    pub fn dyadic(horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            fine_steps: 1 << 12,
            levels: (6..=12).map(|k| 1usize << k).collect(),
            n_paths,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SdeOutcome {
    /// `(Δt, E‖u_EM(T) − u(T)‖₂)`.
    pub errors: Vec<(f64, f64)>,
    pub report: EstimateReport,
    pub n_active_modes: usize,
    pub warnings: Vec<Warning>,
}

/// Runs Euler–Maruyama at every level along shared fine paths and fits the
/// strong order from the mean `L²` error at `T`. Errors are measured in
/// eigen-coordinates, where the exact solution is a phase per mode.
pub fn sde_convergence_experiment(
    h: &DiscreteHamiltonian,
    u0: &[Complex64],
    setup: &SdeSetup,
) -> Result<SdeOutcome> {
    if !(setup.horizon > 0.0 && setup.horizon.is_finite()) || setup.n_paths == 0 || setup.levels.is_empty() {
        return Err(LabError::Domain("need a positive horizon, paths and levels".into()));
    }
    if let Some(bad) = setup
        .levels
        .iter()
        .find(|&&n| n == 0 || setup.fine_steps % n != 0)
    {
        return Err(LabError::Contract(format!(
            "{bad} steps do not subdivide the {}-step reference path",
            setup.fine_steps
        )));
    }
    let c = h.eigen_coefficients(u0)?;
    let cmax = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let active: Vec<usize> = (0..c.len())
        .filter(|&k| c[k].norm() > ACTIVE_MODE_THRESHOLD * cmax)
        .collect();
    if active.is_empty() {
        return Err(LabError::Domain("initial state vanishes".into()));
    }
    let lams: Vec<f64> = active.iter().map(|&k| h.eigenvalues()[k]).collect();
    let coeffs: Vec<Complex64> = active.iter().map(|&k| c[k]).collect();
    let weight = h.grid().spacing().sqrt();

    let mut warnings = Vec::new();
    let max_l2 = lams.iter().map(|l| l * l).fold(0.0, f64::max);
    let coarsest = setup.levels.iter().copied().min().unwrap_or(1);
    let dt_coarse = setup.horizon / coarsest as f64;
    if dt_coarse * max_l2 > 1.0 {
        warnings.push(Warning::numerical(format!(
            "Δt·max λ² = {:.3} > 1 on the coarsest level; the scheme amplifies high modes",
            dt_coarse * max_l2
        )));
    }

    let times = uniform_times(setup.horizon, setup.fine_steps);
    let per_path = (0..setup.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = BrownianPath::sample(&times, setup.seed, i)?;
            let b = path.values();
            let b_end = b[setup.fine_steps];
            let exact: Vec<Complex64> = coeffs
                .iter()
                .zip(&lams)
                .map(|(ck, l)| ck * Complex64::from_polar(1.0, -l * b_end))
                .collect();
            Ok(setup
                .levels
                .iter()
                .map(|&n| {
                    let stride = setup.fine_steps / n;
                    let incs: Vec<f64> = (0..n).map(|j| b[(j + 1) * stride] - b[j * stride]).collect();
                    let em = euler_maruyama_modes(&lams, &coeffs, &incs, setup.horizon / n as f64);
                    weight * em.iter().zip(&exact).map(|(a, e)| (a - e).norm_sqr()).sum::<f64>().sqrt()
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let n = setup.n_paths as f64;
    let errors: Vec<(f64, f64)> = setup
        .levels
        .iter()
        .enumerate()
        .map(|(li, &steps)| {
            let mean = per_path.iter().map(|e| e[li]).sum::<f64>() / n;
            (setup.horizon / steps as f64, mean)
        })
        .collect();
    let opts = FitOptions {
        min_pairs: setup.levels.len().min(FitOptions::default().min_pairs),
        ..FitOptions::default()
    };
    let report = fit_decay_exponent_with(&errors, setup.n_paths, setup.seed, &opts)?;
    Ok(SdeOutcome {
        errors,
        report,
        n_active_modes: active.len(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_potential, Grid, PotentialSpec};
    use crate::initial::{InitialState, Normalization};
    use crate::spectral::build_hamiltonian;

    #[test]
    fn band_limited_state_converges_at_half_order() {
        let g = Grid::new(20.0, 256).unwrap();
        let h = build_hamiltonian(&sample_potential(&PotentialSpec::gaussian(3.0, 1.0), &g).unwrap()).unwrap();
        let u0 = InitialState::BandLimited {
            center: 0.0,
            width: 1.0,
            energy_max: 2.0,
            normalization: Normalization::L2,
        }
        .build(&h)
        .unwrap();
        let out = sde_convergence_experiment(&h, &u0, &SdeSetup::dyadic(1.0, 100, 4)).unwrap();
        let s = out.report.fitted_slope;
        assert!((0.35..=0.65).contains(&s), "{s}");
        assert!(out.warnings.is_empty());
        assert!(out.errors.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn levels_must_divide_reference() {
        let g = Grid::new(10.0, 64).unwrap();
        let h = build_hamiltonian(&sample_potential(&PotentialSpec::zero(), &g).unwrap()).unwrap();
        let u0 = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        let mut s = SdeSetup::dyadic(1.0, 2, 1);
        s.levels.push(3);
        assert!(matches!(sde_convergence_experiment(&h, &u0, &s), Err(LabError::Contract(_))));
    }
}
