//! One function per experiment: build the inputs from a config, run, and
//! return the report payload plus the CSV table.

use std::io::Write;

use serde_json::{json, Value};

use super::config::{Experiment, ExperimentConfig};
use crate::error::{LabError, Result};
use crate::estimates::convolution::default_window_grid;
use crate::estimates::dispersive::log_times;
use crate::estimates::{
    abscissa_only_decay, convolution_lemma_experiment, dispersive_experiment, expectation_decay_experiment,
    resonance_warning, sde_convergence_experiment, strichartz_homogeneous_experiment,
    strichartz_inhomogeneous_experiment, CensorRule, ConvolutionSetup, EstimateReport, Forcing, SdeSetup,
    StrichartzOutcome, StrichartzSetup, Warning,
};
use crate::grid::{lambda0, sample_potential, Grid, PotentialGrid};
use crate::resolvent::LargeBoxResolvent;
use crate::scattering::{
    detect_resonance, scattering_sweep, sweep_lambda_grid, wronskian_at_lambda, wronskian_profile,
    write_sweep_csv, jost_solution, JostResolvent, JostSign, DEFAULT_RESONANCE_TOL,
};
use crate::spectral::{born_ratio_bound, born_series_apply, build_hamiltonian, stone_spectral_density, Branch, DensityMode, DiscreteHamiltonian};
use crate::stochastic::sample_brownian_at;
use crate::Complex64;

/// What an experiment produces before anything is written.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub result: Value,
    pub estimate: Option<EstimateReport>,
    pub csv: Vec<u8>,
    pub warnings: Vec<Warning>,
}

fn io(e: std::io::Error) -> LabError {
    LabError::Io(e.to_string())
}

fn potential(cfg: &ExperimentConfig) -> Result<PotentialGrid> {
    let grid = Grid::new(cfg.grid.half_width, cfg.grid.n_points)?;
    sample_potential(&cfg.potential, &grid)
}

fn hamiltonian(cfg: &ExperimentConfig) -> Result<DiscreteHamiltonian> {
    build_hamiltonian(&potential(cfg)?)
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Artifacts> {
    match cfg.experiment {
        Experiment::ScatterSweep => scatter_sweep(cfg),
        Experiment::Resonance => resonance(cfg),
        Experiment::ResolventCheck => resolvent_check(cfg),
        Experiment::BornCheck => born_check(cfg),
        Experiment::StoneDensity => stone_density(cfg),
        Experiment::SdeConvergence => sde_convergence(cfg),
        Experiment::Dispersive => dispersive(cfg),
        Experiment::ExpectationDecay => expectation_decay(cfg),
        Experiment::ConvolutionLemma => convolution_lemma(cfg),
        Experiment::StrichartzHom | Experiment::StrichartzInhom => strichartz(cfg),
    }
}

fn scatter_sweep(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let v = potential(cfg)?;
    let lambdas = match &cfg.params.lambdas {
        Some(ls) => ls.clone(),
        None => sweep_lambda_grid(lambda0(&cfg.potential)?, cfg.params.n_lambda.unwrap_or(64)),
    };
    let data = scattering_sweep(&v, &lambdas)?;
    let unitarity = data
        .iter()
        .map(|d| (d.transmission.norm_sqr() + d.reflection.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max);
    // x-independence of W at the middle of the sweep
    let mid = lambdas[lambdas.len() / 2];
    let profile = wronskian_profile(
        &jost_solution(&v, mid, JostSign::Plus)?,
        &jost_solution(&v, mid, JostSign::Minus)?,
    )?;
    let mean = profile.iter().sum::<Complex64>() / profile.len() as f64;
    let sd = (profile.iter().map(|w| (w - mean).norm_sqr()).sum::<f64>() / profile.len() as f64).sqrt();
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &data).map_err(io)?;
    Ok(Artifacts {
        result: json!({
            "n_lambda": lambdas.len(),
            "max_unitarity_defect": unitarity,
            "wronskian_relative_spread": sd / mean.norm(),
            "wronskian_spread_lambda": mid,
            "resonant": detect_resonance(&v, DEFAULT_RESONANCE_TOL)?,
        }),
        estimate: None,
        csv,
        warnings: Vec::new(),
    })
}

fn resonance(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let v = potential(cfg)?;
    let resonant = detect_resonance(&v, DEFAULT_RESONANCE_TOL)?;
    let w0 = wronskian_at_lambda(&v, 0.0)?;
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "lambda,re_w,im_w,abs_w").map_err(io)?;
    let mut lambdas = vec![0.0];
    lambdas.extend(log_times(1e-3, 1.0, 13));
    for l in lambdas {
        let w = wronskian_at_lambda(&v, l)?;
        writeln!(csv, "{l},{},{},{}", w.re, w.im, w.norm()).map_err(io)?;
    }
    Ok(Artifacts {
        result: json!({
            "resonant": resonant,
            "wronskian_at_zero": [w0.re, w0.im],
            "tolerance": DEFAULT_RESONANCE_TOL,
        }),
        estimate: None,
        csv,
        warnings: Vec::new(),
    })
}

fn resolvent_check(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let v = potential(cfg)?;
    let lambdas = cfg.params.lambdas.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let probes = cfg
        .params
        .probes
        .clone()
        .unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "lambda,x,y,re_jost,im_jost,re_oracle,im_oracle,rel_err").map_err(io)?;
    let mut worst = 0.0f64;
    for &l in &lambdas {
        let energy = l * l;
        let jost = JostResolvent::new(&v, l)?;
        let (oracle, eps) = LargeBoxResolvent::for_energy(&cfg.potential, energy)?;
        for &y in &probes {
            let col = oracle.boundary_kernel_column(energy, eps, true, y)?;
            for &x in &probes {
                let got = jost.kernel(x, y)?;
                let want = col.at(x)?;
                let rel = (got - want).norm() / want.norm();
                worst = worst.max(rel);
                writeln!(csv, "{l},{x},{y},{},{},{},{},{rel}", got.re, got.im, want.re, want.im).map_err(io)?;
            }
        }
    }
    Ok(Artifacts {
        result: json!({ "lambdas": lambdas, "probes": probes, "max_relative_error": worst }),
        estimate: None,
        csv,
        warnings: Vec::new(),
    })
}

fn born_check(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let v = potential(cfg)?;
    let grid = v.grid().clone();
    let energy = cfg.params.energy_factor.unwrap_or(4.0) * lambda0(&cfg.potential)?;
    let bump = |x: f64| Complex64::new((-4.0 * x * x).exp(), 0.0);
    let f: Vec<Complex64> = grid.points().iter().map(|&x| bump(x)).collect();
    let series = born_series_apply(&v, energy, Branch::Plus, &f, cfg.params.n_terms.unwrap_or(20))?;
    let bound = born_ratio_bound(&v, energy)?;
    let ratios = series.ratios();
    let (oracle, eps) = LargeBoxResolvent::for_energy(&cfg.potential, energy)?;
    let col = oracle.boundary_apply(energy, eps, true, bump)?;
    let inner = 0.5 * grid.half_width();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &x) in grid.points().iter().enumerate() {
        if x.abs() <= inner {
            let w = col.at(x)?;
            num += (series.partial_sum[i] - w).norm_sqr();
            den += w.norm_sqr();
        }
    }
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "term,sup_norm,ratio").map_err(io)?;
    for (n, s) in series.term_sup_norms.iter().enumerate() {
        let r = if n == 0 { String::new() } else { ratios[n - 1].to_string() };
        writeln!(csv, "{n},{s},{r}").map_err(io)?;
    }
    Ok(Artifacts {
        result: json!({
            "energy": energy,
            "ratio_bound": bound,
            "max_ratio": ratios.iter().copied().fold(0.0, f64::max),
            "relative_error_vs_oracle": (num / den).sqrt(),
            "comparison_half_width": inner,
        }),
        estimate: None,
        csv,
        warnings: Vec::new(),
    })
}

fn stone_density(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let h = hamiltonian(cfg)?;
    let k = cfg.params.eigen_index.unwrap_or(30);
    if k >= h.dim() {
        return Err(LabError::Config(format!(
            "params.eigen_index: {k} out of range (dimension {})",
            h.dim()
        )));
    }
    let lam = h.eigenvalues()[k];
    let gap = h.eigenvalue_spacing(k);
    let eps = gap / 10.0;
    let span = cfg.params.half_span.unwrap_or(10.0) * gap;
    let n = cfg.params.n_lambda.unwrap_or(4001);
    let mode = DensityMode::Vector(h.eigenvector(k).iter().map(|&x| Complex64::new(x, 0.0)).collect());
    let inside = stone_spectral_density(&h, lam - span, lam + span, eps, n, &mode)?;
    let edge = stone_spectral_density(&h, lam, lam + span, eps, n, &mode)?;
    let mut csv = Vec::new();
    inside.write_csv(&mut csv).map_err(io)?;
    let warnings = inside.warnings.iter().map(Warning::numerical).collect();
    Ok(Artifacts {
        result: json!({
            "eigen_index": k,
            "eigenvalue": lam,
            "epsilon": eps,
            "mass_enclosing": inside.integral(),
            "mass_edge": edge.integral(),
        }),
        estimate: None,
        csv,
        warnings,
    })
}

fn sde_convergence(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let h = hamiltonian(cfg)?;
    let u0 = cfg.initial_state().build(&h)?;
    let s = &cfg.stochastic;
    let setup = SdeSetup {
        horizon: s.horizon,
        fine_steps: s.n_steps,
        levels: cfg.sde_levels(),
        n_paths: s.n_paths,
        seed: s.seed,
    };
    let out = sde_convergence_experiment(&h, &u0, &setup)?;
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "dt,mean_error").map_err(io)?;
    for (dt, e) in &out.errors {
        writeln!(csv, "{dt},{e}").map_err(io)?;
    }
    Ok(Artifacts {
        result: json!({ "levels": setup.levels, "n_active_modes": out.n_active_modes }),
        estimate: Some(out.report),
        csv,
        warnings: out.warnings,
    })
}

fn sample_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let s = &cfg.stochastic;
    log_times(cfg.params.t_min.unwrap_or(0.5).min(s.horizon), s.horizon, s.n_steps)
}

fn dispersive(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let h = hamiltonian(cfg)?;
    let u0 = cfg.initial_state().build(&h)?;
    let s = &cfg.stochastic;
    let ensemble = sample_brownian_at(&sample_times(cfg), s.n_paths, s.seed, 0)?;
    let defaults = CensorRule::default();
    let rule = CensorRule {
        min_scale: cfg.params.censor_min_scale.unwrap_or(defaults.min_scale),
        max_scale: cfg.params.censor_max_scale.unwrap_or(defaults.max_scale),
    };
    let out = dispersive_experiment(&h, &ensemble, &u0, cfg.params.project.unwrap_or(true), &rule)?;
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "path,t,beta,sup_norm").map_err(io)?;
    for d in &out.samples {
        writeln!(csv, "{},{},{},{}", d.path, d.t, d.beta, d.sup_norm).map_err(io)?;
    }
    Ok(Artifacts {
        result: json!({
            "beta_window": [out.beta_window.0, out.beta_window.1],
            "n_samples": out.samples.len(),
            "n_censored": out.n_censored,
            "max_sup_norm": out.max_sup_norm,
        }),
        estimate: out.report,
        csv,
        warnings: out.warnings,
    })
}

fn expectation_decay(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let h = hamiltonian(cfg)?;
    let u0 = cfg.initial_state().build(&h)?;
    let s = &cfg.stochastic;
    let p = cfg.params.moment_p.unwrap_or(1.0);
    let ensemble = sample_brownian_at(&sample_times(cfg), s.n_paths, s.seed, 0)?;
    let out = expectation_decay_experiment(&h, &ensemble, &u0, p, cfg.params.project.unwrap_or(true))?;
    let abscissa = abscissa_only_decay(&ensemble, p)?;
    let predicted = abscissa.predicted.clone().unwrap_or_default();
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "t,moment,abscissa_only,abscissa_only_exact").map_err(io)?;
    for (((t, m), (_, a)), e) in out.per_time.iter().zip(&abscissa.per_time).zip(&predicted) {
        writeln!(csv, "{t},{m},{a},{e}").map_err(io)?;
    }
    // |β|^{-1/2} has infinite variance at p = 1, so the per-time agreement
    // is summarised by its median rather than by the fitted slope.
    let mut ratios: Vec<f64> = abscissa.per_time.iter().zip(&predicted).map(|((_, a), e)| a / e).collect();
    ratios.sort_by(f64::total_cmp);
    let median = if ratios.is_empty() {
        f64::NAN
    } else {
        0.5 * (ratios[(ratios.len() - 1) / 2] + ratios[ratios.len() / 2])
    };
    Ok(Artifacts {
        result: json!({
            "p": p,
            "abscissa_only_fit": abscissa.report,
            "abscissa_only_median_ratio": median,
        }),
        estimate: Some(out.report),
        csv,
        warnings: out.warnings,
    })
}

fn convolution_lemma(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let s = &cfg.stochastic;
    let setup = ConvolutionSetup {
        alpha: cfg.params.alpha.unwrap_or(0.5),
        t_grid: cfg.params.windows.clone().unwrap_or_else(default_window_grid),
        n_steps: s.n_steps,
        n_paths: s.n_paths,
        seed: s.seed,
    };
    let out = convolution_lemma_experiment(&setup, &|_| 1.0)?;
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "window,lhs,ratio").map_err(io)?;
    for ((t, l), r) in out.lhs.iter().zip(&out.ratios) {
        writeln!(csv, "{t},{l},{r}").map_err(io)?;
    }
    Ok(Artifacts {
        result: json!({
            "alpha": out.alpha,
            "predicted_exponent": 3.0 - out.alpha,
            "ratio_spread": out.ratio_spread,
        }),
        estimate: Some(out.report),
        csv,
        warnings: Vec::new(),
    })
}

fn strichartz_csv(out: &StrichartzOutcome) -> Result<Vec<u8>> {
    let mut csv = Vec::new();
    writeln!(csv, "# schema=1").map_err(io)?;
    writeln!(csv, "window,lhs,rhs").map_err(io)?;
    for ((t, l), r) in out.lhs.iter().zip(&out.rhs) {
        writeln!(csv, "{t},{l},{r}").map_err(io)?;
    }
    Ok(csv)
}

fn strichartz(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let h = hamiltonian(cfg)?;
    let g = cfg.initial_state().build(&h)?;
    let s = &cfg.stochastic;
    let n = &cfg.norms;
    let setup = StrichartzSetup {
        rho: n.rho,
        r: n.r,
        p: n.p,
        t_grid: cfg.params.windows.clone().unwrap_or_else(default_window_grid),
        n_times: s.n_steps,
        n_paths: s.n_paths,
        seed: s.seed,
        project: cfg.params.project.unwrap_or(true),
    };
    let out = if cfg.experiment == Experiment::StrichartzHom {
        strichartz_homogeneous_experiment(&h, &g, &setup)?
    } else {
        strichartz_inhomogeneous_experiment(&h, &Forcing::Profile(g), &setup)?
    };
    let mut warnings: Vec<Warning> = resonance_warning(&h)?.into_iter().collect();
    if out.time_refinement_change > 0.05 {
        warnings.push(Warning::numerical(format!(
            "doubling the time samples changed the largest-window norm by {:.1}%",
            100.0 * out.time_refinement_change
        )));
    }
    Ok(Artifacts {
        result: json!({
            "mu": out.mu,
            "ratios": out.ratios,
            "ratio_spread": out.ratio_spread,
            "time_refinement_change": out.time_refinement_change,
        }),
        csv: strichartz_csv(&out)?,
        estimate: out.report,
        warnings,
    })
}
