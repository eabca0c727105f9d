//! Log-log least squares with a bootstrap confidence interval for the slope.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_pairs: usize,
    /// Required span `log10(max a / min a)`.
    pub min_decades: f64,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_pairs: 8,
            min_decades: 1.5,
            bootstrap_resamples: 1000,
            bootstrap_seed: 0x5eed,
        }
    }
}

impl FitOptions {
    /// Options for fits over a short, fixed grid of window lengths, where
    /// the abscissa span is set by the experiment rather than by sampling.
    pub fn window_grid() -> Self {
        Self {
            min_decades: 1.0,
            ..Self::default()
        }
    }
}

/// A fitted power law `v ≈ e^{intercept} · a^{slope}` and its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub slope_ci_95: (f64, f64),
    pub n_paths: usize,
    pub seed: u64,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# schema=1")?;
        writeln!(out, "abscissa,value")?;
        for (a, v) in self.abscissa.iter().zip(&self.values) {
            writeln!(out, "{a},{v}")?;
        }
        Ok(())
    }

    pub fn ci_width(&self) -> f64 {
        self.slope_ci_95.1 - self.slope_ci_95.0
    }
}

fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn fit_decay_exponent(pairs: &[(f64, f64)], n_paths: usize, seed: u64) -> Result<EstimateReport> {
    fit_decay_exponent_with(pairs, n_paths, seed, &FitOptions::default())
}

pub fn fit_decay_exponent_with(
    pairs: &[(f64, f64)],
    n_paths: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<EstimateReport> {
    if pairs.len() < opts.min_pairs {
        return Err(LabError::Conditioning(format!(
            "{} pairs given, at least {} required",
            pairs.len(),
            opts.min_pairs
        )));
    }
    if let Some(bad) = pairs.iter().find(|(a, v)| !(*a > 0.0 && *v > 0.0) || !a.is_finite() || !v.is_finite()) {
        return Err(LabError::Domain(format!(
            "abscissa and value must be positive and finite, got {bad:?}"
        )));
    }
    let (amin, amax) = pairs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, _)| (lo.min(*a), hi.max(*a)));
    let decades = (amax / amin).log10();
    if decades < opts.min_decades {
        return Err(LabError::Conditioning(format!(
            "abscissa spans {decades:.2} decades, at least {} required",
            opts.min_decades
        )));
    }
    let xs: Vec<f64> = pairs.iter().map(|(a, _)| a.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, v)| v.ln()).collect();
    let (slope, intercept) =
        ols(&xs, &ys).ok_or_else(|| LabError::Conditioning("degenerate abscissa".into()))?;

    let n = pairs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.bootstrap_seed);
    let mut slopes = Vec::with_capacity(opts.bootstrap_resamples);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    while slopes.len() < opts.bootstrap_resamples {
        for k in 0..n {
            let j = rng.random_range(0..n);
            bx[k] = xs[j];
            by[k] = ys[j];
        }
        if let Some((s, _)) = ols(&bx, &by) {
            slopes.push(s);
        }
    }
    let ci = if slopes.is_empty() {
        (slope, slope)
    } else {
        slopes.sort_by(f64::total_cmp);
        (
            percentile(&slopes, 0.025).min(slope),
            percentile(&slopes, 0.975).max(slope),
        )
    };
    Ok(EstimateReport {
        abscissa: pairs.iter().map(|p| p.0).collect(),
        values: pairs.iter().map(|p| p.1).collect(),
        fitted_slope: slope,
        fitted_intercept: intercept,
        slope_ci_95: ci,
        n_paths,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let pairs: Vec<(f64, f64)> = grid(12).into_iter().map(|a| (a, a.powf(-0.5))).collect();
        let r = fit_decay_exponent(&pairs, 1, 0).unwrap();
        assert!((r.fitted_slope + 0.5).abs() < 1e-12);
        assert!(r.ci_width() < 1e-12);
        assert!(r.slope_ci_95.0 <= r.fitted_slope && r.fitted_slope <= r.slope_ci_95.1);

        let pairs: Vec<(f64, f64)> = grid(12).into_iter().map(|a| (a, 3.0 * a.powf(-0.25))).collect();
        let r = fit_decay_exponent(&pairs, 1, 0).unwrap();
        assert!((r.fitted_slope + 0.25).abs() < 1e-12);
        assert!((r.fitted_intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<(f64, f64)> = grid(40)
            .into_iter()
            .map(|a| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (a, a.powf(-0.5) * (1.0 + 0.01 * z))
            })
            .collect();
        let r = fit_decay_exponent(&pairs, 1, 0).unwrap();
        assert!((-0.52..=-0.48).contains(&r.fitted_slope));
        assert!(r.slope_ci_95.0 <= r.fitted_slope && r.fitted_slope <= r.slope_ci_95.1);
        assert!(r.ci_width() > 0.0);
    }

    #[test]
    fn preconditions() {
        let few: Vec<(f64, f64)> = grid(5).into_iter().map(|a| (a, a)).collect();
        assert!(matches!(fit_decay_exponent(&few, 1, 0), Err(LabError::Conditioning(_))));
        let narrow: Vec<(f64, f64)> = (0..10).map(|i| (1.0 + 0.1 * i as f64, 1.0)).collect();
        assert!(matches!(fit_decay_exponent(&narrow, 1, 0), Err(LabError::Conditioning(_))));
        let mut bad: Vec<(f64, f64)> = grid(10).into_iter().map(|a| (a, a)).collect();
        bad[3].1 = 0.0;
        assert!(matches!(fit_decay_exponent(&bad, 1, 0), Err(LabError::Domain(_))));
    }

    #[test]
    fn report_serializes() {
        let pairs: Vec<(f64, f64)> = grid(8).into_iter().map(|a| (a, a)).collect();
        let r = fit_decay_exponent(&pairs, 4, 9).unwrap();
        let back: EstimateReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 10);
    }
}
