//! Experiment configuration: a TOML file with fixed sections.
//!
//! ```toml
//! experiment = "dispersive"
//! output_dir = "runs/dispersive"
//!
//! [potential]
//! family = "gaussian"
//! amplitude = 3.0
//! width = 1.0
//!
//! [grid]
//! n_points = 2048
//! half_width = 40.0
//!
//! [stochastic]
//! horizon = 8.0
//! n_steps = 16
//! n_paths = 200
//! seed = 1
//!
//! [norms]
//! rho = 2.0
//! r = 4.0
//! p = 4.0
//!
//! [initial]            # optional; per-experiment default otherwise
//! kind = "gaussian"
//! width = 0.1
//! normalization = "l1"
//!
//! [params]             # optional experiment-specific knobs
//! t_min = 0.5
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::estimates::norms::{admissible_pair, conjugate};
use crate::estimates::strichartz::MIN_TIME_STEPS;
use crate::grid::{Grid, PotentialSpec};
use crate::initial::{InitialState, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ScatterSweep,
    Resonance,
    ResolventCheck,
    BornCheck,
    StoneDensity,
    SdeConvergence,
    Dispersive,
    ExpectationDecay,
    ConvolutionLemma,
    StrichartzHom,
    StrichartzInhom,
}

/// Static description of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentInfo {
    pub experiment: Experiment,
    pub name: &'static str,
    pub description: &'static str,
    pub claim: &'static str,
}

const CATALOGUE: [ExperimentInfo; 11] = [
    ExperimentInfo {
        experiment: Experiment::ScatterSweep,
        name: "scatter-sweep",
        description: "Wronskian and transmission/reflection coefficients over a λ sweep",
        claim: "W(λ) is x-independent and |T|² + |R|² = 1",
    },
    ExperimentInfo {
        experiment: Experiment::Resonance,
        name: "resonance",
        description: "classifies the potential by the size of W(0)",
        claim: "the dispersive bound assumes no zero-energy resonance",
    },
    ExperimentInfo {
        experiment: Experiment::ResolventCheck,
        name: "resolvent-check",
        description: "Jost-solution resolvent kernel against a limiting-absorption solve",
        claim: "R_V(λ² ± i0)(x, y) = f₊(x_>) f₋(x_<) / W(λ)",
    },
    ExperimentInfo {
        experiment: Experiment::BornCheck,
        name: "born-check",
        description: "Born series term ratios and partial sum at high energy",
        claim: "R_V = Σ R₀(−V R₀)ⁿ converges geometrically for λ > ‖V‖₁²",
    },
    ExperimentInfo {
        experiment: Experiment::StoneDensity,
        name: "stone-density",
        description: "spectral mass of an eigenvector from the resolvent jump",
        claim: "Stone's formula recovers the spectral measure",
    },
    ExperimentInfo {
        experiment: Experiment::SdeConvergence,
        name: "sde-convergence",
        description: "Euler–Maruyama for the Itô form against e^{−iβ(T)H}u0",
        claim: "the solution operator is the time-changed propagator e^{−iβ(t)H}",
    },
    ExperimentInfo {
        experiment: Experiment::Dispersive,
        name: "dispersive",
        description: "pathwise sup-norm decay against |β(t)|",
        claim: "‖e^{−iβ(t)H}P_ac‖_{L¹→L^∞} ≲ |β(t)|^{−1/2} without a zero-energy resonance",
    },
    ExperimentInfo {
        experiment: Experiment::ExpectationDecay,
        name: "expectation-decay",
        description: "L^p(Ω) sup-norm decay against t, with the abscissa-only cross-check",
        claim: "(E‖u(t)‖_∞^p)^{1/p} ≲ t^{−1/4} for 1 ≤ p < 2",
    },
    ExperimentInfo {
        experiment: Experiment::ConvolutionLemma,
        name: "convolution-lemma",
        description: "window scaling of the singular Brownian convolution",
        claim: "E∫(∫|β(t)−β(s)|^{−α}|f(s)|ds)²dt ≲ T^{2−α} E∫|f|²",
    },
    ExperimentInfo {
        experiment: Experiment::StrichartzHom,
        name: "strichartz-hom",
        description: "homogeneous space-time-probability norm over window lengths",
        claim: "‖e^{−iβ(t)H}P_ac u0‖_{L^r(Ω;L^r_T L^p)} ≲ T^{μ/2}‖u0‖₂",
    },
    ExperimentInfo {
        experiment: Experiment::StrichartzInhom,
        name: "strichartz-inhom",
        description: "Duhamel term norm over window lengths",
        claim: "‖∫S(t,σ)P_ac f dσ‖_{L^ρ(Ω;L^r_T L^p)} ≲ T^μ ‖f‖_{L^ρ(Ω;L^{r'}_T L^{p'})}",
    },
];

/// All experiments in a stable order.
pub fn list_experiments() -> &'static [ExperimentInfo] {
    &CATALOGUE
}

impl Experiment {
    pub fn info(self) -> &'static ExperimentInfo {
        CATALOGUE
            .iter()
            .find(|i| i.experiment == self)
            .expect("every experiment is catalogued")
    }

    pub fn name(self) -> &'static str {
        self.info().name
    }

    fn is_stochastic(self) -> bool {
        matches!(
            self,
            Experiment::SdeConvergence
                | Experiment::Dispersive
                | Experiment::ExpectationDecay
                | Experiment::ConvolutionLemma
                | Experiment::StrichartzHom
                | Experiment::StrichartzInhom
        )
    }

    /// Initial data used when the config has no `[initial]` section.
    pub fn default_initial(self) -> InitialState {
        match self {
            Experiment::SdeConvergence => InitialState::BandLimited {
                center: 0.0,
                width: 1.0,
                energy_max: 2.0,
                normalization: Normalization::L2,
            },
            Experiment::StrichartzHom | Experiment::StrichartzInhom => {
                InitialState::gaussian(1.0, Normalization::L2)
            }
            _ => InitialState::gaussian(0.1, Normalization::L1),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    #[serde(alias = "L_box")]
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 2048,
            half_width: 40.0,
        }
    }
}

/// Largest seed representable as a TOML integer.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticConfig {
    #[serde(alias = "T")]
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            horizon: 8.0,
            n_steps: 16,
            n_paths: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    pub rho: f64,
    pub r: f64,
    pub p: f64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self {
            rho: 2.0,
            r: 4.0,
            p: 4.0,
        }
    }
}

/// Optional per-experiment settings; each experiment reads only its own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// λ values (scatter-sweep, resolvent-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Number of λ points (scatter-sweep, stone-density).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_lambda: Option<usize>,
    /// Probe coordinates for the kernel comparison (resolvent-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<f64>>,
    /// Energy as a multiple of ‖V‖₁² (born-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_factor: Option<f64>,
    /// Number of Born terms beyond the first (born-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_terms: Option<usize>,
    /// Eigenvector whose spectral mass is measured (stone-density).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_index: Option<usize>,
    /// Half-width of the enclosing interval in units of the local
    /// eigenvalue gap (stone-density).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_span: Option<f64>,
    /// Euler step counts; each must divide `stochastic.n_steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    /// First of the log-spaced sample times in `[t_min, horizon]`
    /// (dispersive, expectation-decay).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    /// Moment order (expectation-decay).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_p: Option<f64>,
    /// Remove bound states before propagating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<bool>,
    /// Singularity exponent (convolution-lemma).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Window lengths T (convolution-lemma, strichartz-*).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<f64>>,
    /// Censoring window scales (dispersive).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_min_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_max_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub stochastic: StochasticConfig,
    #[serde(default)]
    pub norms: NormsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub params: Params,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn field_error(path: &str, msg: impl fmt::Display) -> LabError {
    LabError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending field path.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().trim().to_string();
            match inner.span() {
                Some(span) => {
                    let line = text[..span.start].matches('\n').count() + 1;
                    field_error(&path, format!("{msg} (line {line})"))
                }
                None => field_error(&path, msg),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML form; parsing it gives back `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical form, hex encoded. The output location is
    /// left out so that the same run hashes alike wherever it is written.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn initial_state(&self) -> InitialState {
        self.initial
            .clone()
            .unwrap_or_else(|| self.experiment.default_initial())
    }

    pub fn validate(&self) -> Result<()> {
        self.potential
            .validate()
            .map_err(|e| field_error("potential", e))?;
        if self.grid.n_points < Grid::MIN_POINTS {
            return Err(field_error(
                "grid.n_points",
                format!("must be at least {}", Grid::MIN_POINTS),
            ));
        }
        if !(self.grid.half_width > 0.0 && self.grid.half_width.is_finite()) {
            return Err(field_error("grid.half_width", "must be positive and finite"));
        }
        if self.stochastic.seed > MAX_SEED {
            return Err(field_error(
                "stochastic.seed",
                format!("must be at most {MAX_SEED}"),
            ));
        }
        if let Some(init) = &self.initial {
            init.validate().map_err(|e| field_error("initial", e))?;
        }
        if self.experiment.is_stochastic() {
            let s = &self.stochastic;
            if !(s.horizon > 0.0 && s.horizon.is_finite()) {
                return Err(field_error("stochastic.horizon", "must be positive and finite"));
            }
            if s.n_steps == 0 {
                return Err(field_error("stochastic.n_steps", "must be positive"));
            }
            if s.n_paths == 0 {
                return Err(field_error("stochastic.n_paths", "must be positive"));
            }
        }
        self.validate_params()
    }

    fn validate_params(&self) -> Result<()> {
        let p = &self.params;
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(field_error(&format!("params.{name}"), format!("must be positive, got {x}")))
                }
                _ => Ok(()),
            }
        };
        positive("energy_factor", p.energy_factor)?;
        positive("half_span", p.half_span)?;
        positive("t_min", p.t_min)?;
        positive("censor_min_scale", p.censor_min_scale)?;
        positive("censor_max_scale", p.censor_max_scale)?;
        if let Some(ws) = &p.windows {
            if ws.is_empty() || ws.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                return Err(field_error("params.windows", "must be non-empty and positive"));
            }
        }
        if let Some(ls) = &p.lambdas {
            if ls.is_empty() || ls.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(field_error("params.lambdas", "must be non-empty and positive"));
            }
        }
        if let Some(a) = p.alpha {
            if !(0.0..1.0).contains(&a) {
                return Err(field_error("params.alpha", format!("must lie in [0, 1), got {a}")));
            }
        }
        if let Some(q) = p.moment_p {
            if !(1.0..2.0).contains(&q) {
                return Err(field_error("params.moment_p", format!("must lie in [1, 2), got {q}")));
            }
        }
        if let (Some(t_min), true) = (p.t_min, self.experiment.is_stochastic()) {
            if t_min >= self.stochastic.horizon {
                return Err(field_error("params.t_min", "must be below stochastic.horizon"));
            }
        }
        match self.experiment {
            Experiment::SdeConvergence => {
                if let Some(bad) = self
                    .sde_levels()
                    .iter()
                    .find(|&&n| n == 0 || self.stochastic.n_steps % n != 0)
                {
                    return Err(field_error(
                        "params.levels",
                        format!("{bad} does not divide stochastic.n_steps = {}", self.stochastic.n_steps),
                    ));
                }
            }
            Experiment::StrichartzHom | Experiment::StrichartzInhom => {
                let n = &self.norms;
                if !admissible_pair(n.r, n.p) || n.r.is_infinite() {
                    return Err(field_error(
                        "norms",
                        format!("(r, p) = ({}, {}) must be a finite admissible pair", n.r, n.p),
                    ));
                }
                if self.experiment == Experiment::StrichartzInhom && !(conjugate(n.r) <= n.rho && n.rho <= n.r) {
                    return Err(field_error("norms.rho", format!("must lie in [r', r], got {}", n.rho)));
                }
                if self.stochastic.n_steps < MIN_TIME_STEPS {
                    return Err(field_error(
                        "stochastic.n_steps",
                        format!("must be at least {MIN_TIME_STEPS} per window"),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Euler step counts for sde-convergence: the configured list, or the
    /// powers of two from 64 up to `n_steps`.
    pub fn sde_levels(&self) -> Vec<usize> {
        self.params.levels.clone().unwrap_or_else(|| {
            (6..usize::BITS)
                .map(|k| 1usize << k)
                .take_while(|&n| n <= self.stochastic.n_steps)
                .collect()
        })
    }
}
