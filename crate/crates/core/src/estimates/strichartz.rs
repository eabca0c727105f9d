//! Window-length scaling of the homogeneous and inhomogeneous Strichartz
//! quantities
//! `‖e^{−iβ(t)H}P_ac u0‖_{L^r(Ω; L^r(0,T; L^p))}` and
//! `‖∫₀ᵗ S(t,σ)P_ac f(σ) dσ‖_{L^ρ(Ω; L^r(0,T; L^p))}`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay_exponent_with, EstimateReport, FitOptions};
use super::norms::{
    admissible_pair, conjugate, lp_norm_weighted, mu_homogeneous, mu_inhomogeneous, power_mean, time_norm,
};
use crate::error::{LabError, Result};
use crate::spectral::{ActiveBasis, DiscreteHamiltonian};
use crate::stochastic::{uniform_times, BrownianPath};
use crate::Complex64;

/// Minimum number of time steps per window.
pub const MIN_TIME_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrichartzSetup {
    /// Ω exponent; ignored by the homogeneous experiment, which uses `r`.
    pub rho: f64,
    pub r: f64,
    pub p: f64,
    pub t_grid: Vec<f64>,
    pub n_times: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub project: bool,
}

impl StrichartzSetup {
    fn validate(&self) -> Result<()> {
        if !admissible_pair(self.r, self.p) {
            return Err(LabError::Domain(format!(
                "(r, p) = ({}, {}) is not admissible",
                self.r, self.p
            )));
        }
        if self.r.is_infinite() {
            return Err(LabError::Domain("r = ∞ cannot be sampled; use a finite admissible pair".into()));
        }
        if self.n_times < MIN_TIME_STEPS {
            return Err(LabError::Domain(format!(
                "n_times must be at least {MIN_TIME_STEPS}, got {}",
                self.n_times
            )));
        }
        if self.n_paths == 0 || self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t > 0.0)) {
            return Err(LabError::Domain("need paths and positive window lengths".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrichartzOutcome {
    pub mu: f64,
    /// `(T, LHS(T))`.
    pub lhs: Vec<(f64, f64)>,
    /// The right-hand side without its constant, per window.
    pub rhs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub ratio_spread: Option<f64>,
    /// Relative change of the largest-window LHS when `n_times` is doubled.
    pub time_refinement_change: f64,
    pub report: Option<EstimateReport>,
}

/// Paths propagated per GEMM.
const PATH_BATCH: usize = 8;

fn window_paths(setup: &StrichartzSetup, ti: usize, n_times: usize) -> Result<Vec<BrownianPath>> {
    let times = uniform_times(setup.t_grid[ti], n_times);
    let offset = (ti * setup.n_paths) as u64;
    (0..setup.n_paths as u64)
        .into_par_iter()
        .map(|i| BrownianPath::sample(&times, setup.seed, offset + i))
        .collect()
}

fn homogeneous_lhs(
    basis: &ActiveBasis,
    dx: f64,
    setup: &StrichartzSetup,
    ti: usize,
    n_times: usize,
) -> Result<f64> {
    let paths = window_paths(setup, ti, n_times)?;
    let per_path = paths
        .par_chunks(PATH_BATCH)
        .map(|chunk| {
            let taus: Vec<f64> = chunk.iter().flat_map(|p| p.values().to_vec()).collect();
            let states = basis.propagate_many(&taus)?;
            let norms: Vec<f64> = states.iter().map(|u| lp_norm_weighted(u, setup.p, dx)).collect();
            chunk
                .iter()
                .zip(norms.chunks(n_times + 1))
                .map(|(p, v)| time_norm(v, p.times(), setup.r))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    power_mean(&per_path.concat(), setup.r)
}

fn spread(ratios: &[f64]) -> Option<f64> {
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    (min > 0.0 && max.is_finite()).then(|| max / min)
}

fn fit_lhs(lhs: &[(f64, f64)], setup: &StrichartzSetup) -> Option<EstimateReport> {
    fit_decay_exponent_with(lhs, setup.n_paths, setup.seed, &FitOptions::window_grid()).ok()
}

/// `LHS(T) = ‖e^{−iβ(t)H}(P_ac)u0‖_{L^r(Ω; L^r(0,T; L^p_x))}` over the
/// window grid, compared with `T^{μ/2}‖(P_ac)u0‖₂`.
pub fn strichartz_homogeneous_experiment(
    h: &DiscreteHamiltonian,
    u0: &[Complex64],
    setup: &StrichartzSetup,
) -> Result<StrichartzOutcome> {
    setup.validate()?;
    let dx = h.grid().spacing();
    let n0 = lp_norm_weighted(u0, 2.0, dx);
    if (n0 - 1.0).abs() > 1e-9 {
        return Err(LabError::Contract(format!("‖u0‖₂ must be 1, got {n0}")));
    }
    let mu = mu_homogeneous(setup.r, setup.p)?;
    let start = if setup.project { h.project_ac(u0)? } else { u0.to_vec() };
    let data_norm = lp_norm_weighted(&start, 2.0, dx);
    let basis = h.active_basis(&start, 1e-12)?;

    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (ti, &t) in setup.t_grid.iter().enumerate() {
        lhs.push((t, homogeneous_lhs(&basis, dx, setup, ti, setup.n_times)?));
        rhs.push(t.powf(mu / 2.0) * data_norm);
    }
    let last = setup.t_grid.len() - 1;
    let refined = homogeneous_lhs(&basis, dx, setup, last, 2 * setup.n_times)?;
    let ratios: Vec<f64> = lhs.iter().zip(&rhs).map(|((_, l), r)| l / r).collect();
    Ok(StrichartzOutcome {
        mu,
        ratio_spread: spread(&ratios),
        time_refinement_change: (refined - lhs[last].1).abs() / lhs[last].1.max(f64::MIN_POSITIVE),
        report: fit_lhs(&lhs, setup),
        lhs,
        rhs,
        ratios,
    })
}

/// Forcing term `f(σ)` of the inhomogeneous problem, sampled at the left end
/// of every time step. Adapted forcings see only `β(t_0), …, β(t_k)` when
/// asked for step `k`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `f(σ) = g` for all σ.
    Profile(Vec<Complex64>),
    /// `f = g` on the single step `[t_step, t_{step+1})`, zero elsewhere.
    Slice { step: usize, profile: Vec<Complex64> },
    Adapted(Arc<dyn Fn(usize, &[f64]) -> Vec<Complex64> + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Profile(g) => write!(f, "Profile(len {})", g.len()),
            Forcing::Slice { step, profile } => write!(f, "Slice(step {step}, len {})", profile.len()),
            Forcing::Adapted(_) => write!(f, "Adapted(..)"),
        }
    }
}

impl Forcing {
    fn at(&self, k: usize, history: &[f64], n: usize) -> Result<Option<Vec<Complex64>>> {
        let v = match self {
            Forcing::Zero => return Ok(None),
            Forcing::Profile(g) => g.clone(),
            Forcing::Slice { step, profile } => {
                if k != *step {
                    return Ok(None);
                }
                profile.clone()
            }
            Forcing::Adapted(f) => f(k, &history[..=k]),
        };
        if v.len() != n {
            return Err(LabError::Contract(format!(
                "forcing at step {k} has {} entries, grid has {n}",
                v.len()
            )));
        }
        Ok(Some(v))
    }
}

/// `D(t_k) = Σ_{j<k} Δt · S(t_k, t_j) (P_ac) f(t_j)` along one path, built as
/// `e^{−iβ_k H} Σ_{j<k} Δt e^{iβ_j H} f_j` in eigen-coordinates.
pub fn duhamel_states(
    h: &DiscreteHamiltonian,
    path: &BrownianPath,
    forcing: &Forcing,
    project: bool,
) -> Result<Vec<Vec<Complex64>>> {
    let basis = forcing_basis(h, project);
    duhamel_in_basis(h, &basis, path, forcing)
}

fn forcing_basis(h: &DiscreteHamiltonian, project: bool) -> ActiveBasis {
    let bound = h.bound_state_indices();
    let indices: Vec<usize> = (0..h.dim())
        .filter(|k| !(project && bound.contains(k)))
        .collect();
    let zeros = vec![Complex64::new(0.0, 0.0); indices.len()];
    h.mode_basis(indices, zeros)
}

fn duhamel_coefficients(
    h: &DiscreteHamiltonian,
    basis: &ActiveBasis,
    path: &BrownianPath,
    forcing: &Forcing,
) -> Result<Vec<Vec<Complex64>>> {
    let n = path.n_steps();
    let dt = path.times()[n] / n as f64;
    let beta = path.values();
    let lams = basis.eigenvalues();
    let mut acc = vec![Complex64::new(0.0, 0.0); lams.len()];
    let mut out = Vec::with_capacity(n + 1);
    let mut cached: Option<Vec<Complex64>> = None;
    for k in 0..=n {
        out.push(
            acc.iter()
                .zip(lams)
                .map(|(a, l)| a * Complex64::from_polar(1.0, -beta[k] * l))
                .collect(),
        );
        if k == n {
            break;
        }
        let coeffs = match (forcing, &cached) {
            (Forcing::Profile(_), Some(c)) => Some(c.clone()),
            _ => match forcing.at(k, beta, h.dim())? {
                None => None,
                Some(g) => {
                    let full = h.eigen_coefficients(&g)?;
                    let c: Vec<Complex64> = basis.indices().iter().map(|&i| full[i]).collect();
                    if matches!(forcing, Forcing::Profile(_)) {
                        cached = Some(c.clone());
                    }
                    Some(c)
                }
            },
        };
        if let Some(c) = coeffs {
            for ((a, ck), l) in acc.iter_mut().zip(&c).zip(lams) {
                *a += ck * Complex64::from_polar(dt, beta[k] * l);
            }
        }
    }
    Ok(out)
}

fn duhamel_in_basis(
    h: &DiscreteHamiltonian,
    basis: &ActiveBasis,
    path: &BrownianPath,
    forcing: &Forcing,
) -> Result<Vec<Vec<Complex64>>> {
    let coeffs = duhamel_coefficients(h, basis, path, forcing)?;
    basis.synthesize_many(&coeffs)
}

/// `(time norm of ‖D(t)‖_p, time norm of ‖f(t)‖_{p'})` for one path.
fn inhomogeneous_path_terms(
    h: &DiscreteHamiltonian,
    basis: &ActiveBasis,
    path: &BrownianPath,
    forcing: &Forcing,
    setup: &StrichartzSetup,
) -> Result<(f64, f64)> {
    let dx = h.grid().spacing();
    let states = duhamel_in_basis(h, basis, path, forcing)?;
    let norms: Vec<f64> = states.iter().map(|u| lp_norm_weighted(u, setup.p, dx)).collect();
    let lhs = time_norm(&norms, path.times(), setup.r)?;
    let p_conj = conjugate(setup.p);
    let f_norms = (0..=path.n_steps())
        .map(|k| {
            Ok(forcing
                .at(k, path.values(), h.dim())?
                .map_or(0.0, |g| lp_norm_weighted(&g, p_conj, dx)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rhs = time_norm(&f_norms, path.times(), conjugate(setup.r))?;
    Ok((lhs, rhs))
}

fn inhomogeneous_window(
    h: &DiscreteHamiltonian,
    basis: &ActiveBasis,
    forcing: &Forcing,
    setup: &StrichartzSetup,
    ti: usize,
    n_times: usize,
) -> Result<(f64, f64)> {
    let paths = window_paths(setup, ti, n_times)?;
    let terms = paths
        .par_iter()
        .map(|p| inhomogeneous_path_terms(h, basis, p, forcing, setup))
        .collect::<Result<Vec<_>>>()?;
    let lhs: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let rhs: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok((power_mean(&lhs, setup.rho)?, power_mean(&rhs, setup.rho)?))
}

/// `LHS(T)` of the Duhamel term compared with
/// `T^μ ‖f‖_{L^ρ(Ω; L^{r'}(0,T; L^{p'}))}` over the window grid.
pub fn strichartz_inhomogeneous_experiment(
    h: &DiscreteHamiltonian,
    forcing: &Forcing,
    setup: &StrichartzSetup,
) -> Result<StrichartzOutcome> {
    setup.validate()?;
    let r_conj = conjugate(setup.r);
    if !(r_conj <= setup.rho && setup.rho <= setup.r) {
        return Err(LabError::Domain(format!(
            "need r' ≤ ρ ≤ r, got r' = {r_conj}, ρ = {}, r = {}",
            setup.rho, setup.r
        )));
    }
    let mu = mu_inhomogeneous(setup.r, setup.p)?;
    let basis = forcing_basis(h, setup.project);
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (ti, &t) in setup.t_grid.iter().enumerate() {
        let (l, f) = inhomogeneous_window(h, &basis, forcing, setup, ti, setup.n_times)?;
        lhs.push((t, l));
        rhs.push(t.powf(mu) * f);
    }
    let last = setup.t_grid.len() - 1;
    let (refined, _) = inhomogeneous_window(h, &basis, forcing, setup, last, 2 * setup.n_times)?;
    let ratios: Vec<f64> = lhs
        .iter()
        .zip(&rhs)
        .filter(|(_, r)| **r > 0.0)
        .map(|((_, l), r)| l / r)
        .collect();
    let change = if lhs[last].1 > 0.0 {
        (refined - lhs[last].1).abs() / lhs[last].1
    } else {
        0.0
    };
    Ok(StrichartzOutcome {
        mu,
        ratio_spread: spread(&ratios),
        time_refinement_change: change,
        report: fit_lhs(&lhs, setup),
        lhs,
        rhs,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::convolution::default_window_grid;
    use crate::grid::{sample_potential, Grid, PotentialSpec};
    use crate::initial::{InitialState, Normalization};
    use crate::spectral::build_hamiltonian;

    fn ham(spec: PotentialSpec, n: usize) -> DiscreteHamiltonian {
        let g = Grid::new(40.0, n).unwrap();
        build_hamiltonian(&sample_potential(&spec, &g).unwrap()).unwrap()
    }

    fn setup(r: f64, p: f64, n_paths: usize) -> StrichartzSetup {
        StrichartzSetup {
            rho: 2.0,
            r,
            p,
            t_grid: default_window_grid(),
            n_times: 64,
            n_paths,
            seed: 5,
            project: false,
        }
    }

    #[test]
    fn unitary_pair_is_exact() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 512);
        let u0 = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        let out = strichartz_homogeneous_experiment(&h, &u0, &setup(2.0, 2.0, 4)).unwrap();
        assert_eq!(out.mu, 1.0);
        for &(t, l) in &out.lhs {
            assert!((l - t.sqrt()).abs() < 1e-9, "{l} vs {}", t.sqrt());
        }
    }

    #[test]
    fn homogeneous_ratio_is_bounded() {
        let h = ham(PotentialSpec::zero(), 512);
        let u0 = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        let out = strichartz_homogeneous_experiment(&h, &u0, &setup(4.0, 4.0, 40)).unwrap();
        assert!((out.mu - 0.375).abs() < 1e-15);
        assert!(out.ratio_spread.unwrap() < 5.0);
        assert!(out.report.unwrap().fitted_slope >= out.mu / 2.0 - 0.05);
        assert!(out.time_refinement_change < 0.02);
    }

    #[test]
    fn projected_homogeneous_with_bound_state() {
        let h = ham(PotentialSpec::sech_squared(-2.0, 1.0), 512);
        let u0 = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        let mut s = setup(4.0, 4.0, 20);
        s.project = true;
        let out = strichartz_homogeneous_experiment(&h, &u0, &s).unwrap();
        assert!(out.ratio_spread.unwrap() < 5.0);
    }

    #[test]
    fn inputs_are_checked() {
        let h = ham(PotentialSpec::zero(), 128);
        let u0 = InitialState::gaussian(1.0, Normalization::L1).build(&h).unwrap();
        assert!(matches!(
            strichartz_homogeneous_experiment(&h, &u0, &setup(4.0, 4.0, 2)),
            Err(LabError::Contract(_))
        ));
        let u0 = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        assert!(matches!(
            strichartz_homogeneous_experiment(&h, &u0, &setup(8.0, 4.0, 2)),
            Err(LabError::Domain(_))
        ));
        let mut s = setup(4.0, 4.0, 2);
        s.rho = 1.0;
        assert!(matches!(
            strichartz_inhomogeneous_experiment(&h, &Forcing::Zero, &s),
            Err(LabError::Domain(_))
        ));
        let bad = Forcing::Adapted(Arc::new(|_, _| vec![Complex64::new(1.0, 0.0); 3]));
        assert!(matches!(
            strichartz_inhomogeneous_experiment(&h, &bad, &setup(4.0, 4.0, 2)),
            Err(LabError::Contract(_))
        ));
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let h = ham(PotentialSpec::zero(), 128);
        let out = strichartz_inhomogeneous_experiment(&h, &Forcing::Zero, &setup(4.0, 4.0, 2)).unwrap();
        assert!(out.lhs.iter().all(|&(_, l)| l == 0.0));
        assert!(out.report.is_none());
    }

    #[test]
    fn single_slice_collapses_to_one_propagation() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 256);
        let g = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        let times = uniform_times(1.0, 64);
        let path = BrownianPath::sample(&times, 3, 0).unwrap();
        let step = 10;
        let d = duhamel_states(&h, &path, &Forcing::Slice { step, profile: g.clone() }, false).unwrap();
        let dt = 1.0 / 64.0;
        for k in [0, step, step + 1, 40, 64] {
            let want: Vec<Complex64> = if k <= step {
                vec![Complex64::new(0.0, 0.0); g.len()]
            } else {
                let b = path.values();
                h.propagate(b[k] - b[step], &g).unwrap().iter().map(|z| z * dt).collect()
            };
            let err: f64 = d[k].iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let scale: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            assert!(err <= 0.02 * scale || err < 1e-14, "k={k}: {err} vs {scale}");
        }
    }

    #[test]
    fn duhamel_is_adapted() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 128);
        let g = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        let forcing = Forcing::Adapted(Arc::new(move |_, hist: &[f64]| {
            let b = *hist.last().unwrap();
            g.iter().map(|z| z * b.cos()).collect()
        }));
        let path = BrownianPath::sample(&uniform_times(1.0, 64), 8, 0).unwrap();
        let full = duhamel_states(&h, &path, &forcing, false).unwrap();
        let cut = duhamel_states(&h, &path.truncated(20), &forcing, false).unwrap();
        for k in 0..=20 {
            assert_eq!(full[k], cut[k]);
        }
    }

    #[test]
    fn inhomogeneous_ratio_is_bounded() {
        let h = ham(PotentialSpec::zero(), 512);
        let g = InitialState::gaussian(1.0, Normalization::L2).build(&h).unwrap();
        let mut s = setup(4.0, 4.0, 30);
        s.rho = 2.0;
        let out = strichartz_inhomogeneous_experiment(&h, &Forcing::Profile(g), &s).unwrap();
        assert!((out.mu - 0.375).abs() < 1e-15);
        assert!(out.ratio_spread.unwrap() < 5.0);
    }
}
