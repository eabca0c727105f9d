//! Brownian paths and the random-time propagator `u(t) = e^{−iβ(t)H} u0`,
//! plus an explicit Euler–Maruyama integrator for the Itô form
//! `du = −½H²u dt − iHu dβ` that serves as an independent check.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, index)`, so
//! an ensemble is bit-identical however the paths are scheduled.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::spectral::DiscreteHamiltonian;
use crate::Complex64;

/// Coefficients below this fraction of the largest are treated as absent
/// when integrating mode-by-mode.
pub const ACTIVE_MODE_THRESHOLD: f64 = 1e-13;

/// The RNG for path `index` of an ensemble seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Brownian path sampled at `0 = t_0 < t_1 < … < t_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    index: u64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl BrownianPath {
    /// Draws `β(t_k)` at the given increasing times (with `t_0 = 0` prepended
    /// when absent).
    pub fn sample(times: &[f64], seed: u64, index: u64) -> Result<Self> {
        let mut ts = Vec::with_capacity(times.len() + 1);
        if times.first() != Some(&0.0) {
            ts.push(0.0);
        }
        ts.extend_from_slice(times);
        if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| !t.is_finite()) {
            return Err(LabError::Domain("sample times must be finite and strictly increasing from 0".into()));
        }
        let mut rng = path_rng(seed, index);
        let mut values = Vec::with_capacity(ts.len());
        values.push(0.0);
        let mut b = 0.0;
        for w in ts.windows(2) {
            let z: f64 = StandardNormal.sample(&mut rng);
            b += z * (w[1] - w[0]).sqrt();
            values.push(b);
        }
        Ok(Self {
            index,
            times: ts,
            values,
        })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// The path restricted to its first `k` increments.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.n_steps());
        Self {
            index: self.index,
            times: self.times[..=k].to_vec(),
            values: self.values[..=k].to_vec(),
        }
    }

    fn uniform_step(&self) -> Result<f64> {
        let n = self.n_steps();
        let dt = self.times[n] / n as f64;
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
        if uniform {
            Ok(dt)
        } else {
            Err(LabError::Contract("path is not sampled on a uniform time grid".into()))
        }
    }
}

/// `n_paths` independent paths on a uniform grid of `n_steps` steps over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEnsemble {
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub paths: Vec<BrownianPath>,
}

pub fn uniform_times(horizon: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps)
        .map(|k| horizon * k as f64 / n_steps as f64)
        .collect()
}

pub fn sample_brownian(horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<BrownianEnsemble> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(LabError::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(LabError::Domain("n_steps and n_paths must be at least 1".into()));
    }
    let times = uniform_times(horizon, n_steps);
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| BrownianPath::sample(&times, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(BrownianEnsemble {
        horizon,
        n_steps,
        seed,
        paths,
    })
}

/// `n_paths` paths sampled at arbitrary increasing `times`, drawing from
/// streams `stream_offset .. stream_offset + n_paths`.
pub fn sample_brownian_at(times: &[f64], n_paths: usize, seed: u64, stream_offset: u64) -> Result<BrownianEnsemble> {
    if n_paths == 0 || times.is_empty() {
        return Err(LabError::Domain("need at least one path and one sample time".into()));
    }
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| BrownianPath::sample(times, seed, stream_offset + i))
        .collect::<Result<Vec<_>>>()?;
    Ok(BrownianEnsemble {
        horizon: times[times.len() - 1],
        n_steps: paths[0].n_steps(),
        seed,
        paths,
    })
}

impl BrownianEnsemble {
    /// CSV audit trail with columns `path,t,beta`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# schema=1")?;
        writeln!(out, "path,t,beta")?;
        for p in &self.paths {
            for (t, b) in p.times.iter().zip(&p.values) {
                writeln!(out, "{},{t},{b}", p.index)?;
            }
        }
        Ok(())
    }
}

/// States of one path at its sample times.
#[derive(Debug, Clone)]
pub struct PathSolution {
    pub path_index: u64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub ac_projected: bool,
}

impl PathSolution {
    /// Snapshot CSV with columns `t,x,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W, points: &[f64]) -> std::io::Result<()> {
        writeln!(out, "# schema=1")?;
        writeln!(out, "t,x,re,im")?;
        for (t, u) in self.times.iter().zip(&self.states) {
            for (x, z) in points.iter().zip(u) {
                writeln!(out, "{t},{x},{},{}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// `S(t, s) u = e^{−i(β(t) − β(s))H} u`.
pub fn evolution_operator(
    h: &DiscreteHamiltonian,
    beta_t: f64,
    beta_s: f64,
    u: &[Complex64],
) -> Result<Vec<Complex64>> {
    h.propagate(beta_t - beta_s, u)
}

/// `u(t_k) = e^{−iβ(t_k)H} u0` (after removing bound states when `project`)
/// along every path of the ensemble.
pub fn time_changed_propagate(
    h: &DiscreteHamiltonian,
    ensemble: &BrownianEnsemble,
    u0: &[Complex64],
    project: bool,
) -> Result<Vec<PathSolution>> {
    let start = if project { h.project_ac(u0)? } else { u0.to_vec() };
    let basis = h.active_basis(&start, 0.0)?;
    ensemble
        .paths
        .par_iter()
        .map(|p| {
            let mut states = basis.propagate_many(p.values())?;
            states[0] = start.clone();
            Ok(PathSolution {
                path_index: p.index,
                times: p.times.clone(),
                states,
                ac_projected: project,
            })
        })
        .collect()
}

/// Final state of an Euler–Maruyama run and its stability diagnostic.
#[derive(Debug, Clone)]
pub struct EulerMaruyamaOutcome {
    pub state: Vec<Complex64>,
    pub warning: Option<String>,
}

/// Euler–Maruyama on eigen-coefficients: per step,
/// `c ← c·(1 − ½λ²Δt − iλΔβ)`. Returns `c(T)`.
pub fn euler_maruyama_modes(
    eigenvalues: &[f64],
    coefficients: &[Complex64],
    increments: &[f64],
    dt: f64,
) -> Vec<Complex64> {
    coefficients
        .iter()
        .zip(eigenvalues)
        .map(|(&c, &lam)| {
            let drift = 1.0 - 0.5 * lam * lam * dt;
            increments
                .iter()
                .fold(c, |acc, db| acc * Complex64::new(drift, -lam * db))
        })
        .collect()
}

/// Integrates the Itô form along `path` with `n_steps` uniform steps, each
/// using the sum of the path's increments it covers. Modes absent from `u0`
/// stay absent.
pub fn euler_maruyama_ito(
    h: &DiscreteHamiltonian,
    path: &BrownianPath,
    u0: &[Complex64],
    n_steps: usize,
) -> Result<EulerMaruyamaOutcome> {
    let dt_path = path.uniform_step()?;
    let m = path.n_steps();
    if n_steps == 0 || m % n_steps != 0 {
        return Err(LabError::Contract(format!(
            "{n_steps} Euler steps do not subdivide a path of {m} increments"
        )));
    }
    let stride = m / n_steps;
    let dt = dt_path * stride as f64;
    let increments: Vec<f64> = path
        .values
        .iter()
        .step_by(stride)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();

    let c = h.eigen_coefficients(u0)?;
    let cmax = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let active: Vec<usize> = (0..c.len())
        .filter(|&k| c[k].norm() > ACTIVE_MODE_THRESHOLD * cmax)
        .collect();
    let lams: Vec<f64> = active.iter().map(|&k| h.eigenvalues()[k]).collect();
    let coeffs: Vec<Complex64> = active.iter().map(|&k| c[k]).collect();

    let max_l2 = lams.iter().map(|l| l * l).fold(0.0, f64::max);
    let warning = (dt * max_l2 > 1.0).then(|| {
        format!(
            "Δt·max λ² = {:.3} > 1 over the active modes; the scheme amplifies them",
            dt * max_l2
        )
    });

    let evolved = euler_maruyama_modes(&lams, &coeffs, &increments, dt);
    let mut full = vec![Complex64::new(0.0, 0.0); c.len()];
    for (&k, v) in active.iter().zip(evolved) {
        full[k] = v;
    }
    Ok(EulerMaruyamaOutcome {
        state: h.synthesize(&full)?,
        warning,
    })
}
