//! Experiment driver: one config in, `report.json`, `data.csv` and
//! `manifest.json` out.
//!
//! Exit status is 0 on success, 2 when the run completed but a hypothesis of
//! the bound under test fails for the input (the report lists which), and 1
//! on any error.

pub mod config;
pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{list_experiments, Experiment, ExperimentConfig, ExperimentInfo};
pub use experiments::{execute, Artifacts};

use crate::error::{LabError, Result};
use crate::estimates::{Warning, WarningKind};
use crate::grid::Grid;

/// Environment variable holding the worker count.
pub const THREADS_ENV: &str = "DISPERSION_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    HypothesisViolation,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::HypothesisViolation => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub output_dir: PathBuf,
    pub config_hash: String,
    pub warnings: Vec<Warning>,
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads the worker count from [`THREADS_ENV`]; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(LabError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| LabError::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs the experiment and writes its artifacts into `config.output_dir`.
/// Nothing is written if the experiment fails.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    let (artifacts, workers) = with_threads(threads, || (execute(config), rayon::current_num_threads()))?;
    let artifacts = artifacts?;
    write_outputs(config, &artifacts, workers)
}

fn write_outputs(config: &ExperimentConfig, a: &Artifacts, workers: usize) -> Result<RunSummary> {
    let status = if a.warnings.iter().any(|w| w.kind == WarningKind::Hypothesis) {
        RunStatus::HypothesisViolation
    } else {
        RunStatus::Ok
    };
    let hash = config.hash();
    let grid = &config.grid;
    let report = json!({
        "experiment": config.experiment.name(),
        "config_hash": hash,
        "seed": config.stochastic.seed,
        "grid": {
            "n_points": grid.n_points,
            "half_width": grid.half_width,
            "spacing": Grid::new(grid.half_width, grid.n_points)?.spacing(),
        },
        "status": status,
        "warnings": a.warnings,
        "estimate": a.estimate,
        "result": a.result,
    });
    let report = serde_json::to_string_pretty(&report).map_err(|e| LabError::Io(e.to_string()))? + "\n";

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    write(dir, "report.json", report.as_bytes())?;
    write(dir, "data.csv", &a.csv)?;
    let manifest = json!({
        "experiment": config.experiment.name(),
        "config_hash": hash,
        "seed": config.stochastic.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "workers": workers,
        "files": {
            "report.json": hex_sha256(report.as_bytes()),
            "data.csv": hex_sha256(&a.csv),
        },
        "config": config.to_toml(),
    });
    let manifest = serde_json::to_string_pretty(&manifest).map_err(|e| LabError::Io(e.to_string()))? + "\n";
    write(dir, "manifest.json", manifest.as_bytes())?;
    Ok(RunSummary {
        status,
        output_dir: dir.clone(),
        config_hash: hash,
        warnings: a.warnings.clone(),
    })
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}
