//! Space norms, space-time-probability mixed norms and the exponent
//! bookkeeping for admissible pairs.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::Grid;
use crate::quadrature::integrate_samples;
use crate::Complex64;

fn check_exponent(name: &str, q: f64) -> Result<()> {
    if q >= 1.0 {
        Ok(())
    } else {
        Err(LabError::Domain(format!("{name} must be ≥ 1 (or ∞), got {q}")))
    }
}

/// `(h Σ|u_i|^p)^{1/p}`, or `max |u_i|` for `p = ∞`.
pub fn lp_norm_x(u: &[Complex64], p: f64, grid: &Grid) -> Result<f64> {
    check_exponent("p", p)?;
    if u.len() != grid.n_points() {
        return Err(LabError::Contract(format!(
            "vector has {} entries, grid has {}",
            u.len(),
            grid.n_points()
        )));
    }
    Ok(lp_norm_weighted(u, p, grid.spacing()))
}

pub(crate) fn lp_norm_weighted(u: &[Complex64], p: f64, h: f64) -> f64 {
    if p.is_infinite() {
        return u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    if p == 2.0 {
        return (h * u.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    }
    if p == 1.0 {
        return h * u.iter().map(|z| z.norm()).sum::<f64>();
    }
    (h * u.iter().map(|z| z.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Hölder conjugate `q' = q/(q − 1)`, with `1' = ∞` and `∞' = 1`.
pub fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// Exponents of `L^ρ(Ω; L^r(s, s+T; L^p_x))` and the time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedNormSpec {
    pub rho: f64,
    pub r: f64,
    pub p: f64,
    #[serde(default)]
    pub window_start: f64,
    pub window_length: f64,
}

impl MixedNormSpec {
    pub fn new(rho: f64, r: f64, p: f64, window_start: f64, window_length: f64) -> Result<Self> {
        let s = Self {
            rho,
            r,
            p,
            window_start,
            window_length,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent("rho", self.rho)?;
        check_exponent("r", self.r)?;
        check_exponent("p", self.p)?;
        if !(self.window_length > 0.0 && self.window_length.is_finite()) {
            return Err(LabError::Domain(format!(
                "window length must be positive, got {}",
                self.window_length
            )));
        }
        Ok(())
    }

    pub fn r_conjugate(&self) -> f64 {
        conjugate(self.r)
    }

    pub fn p_conjugate(&self) -> f64 {
        conjugate(self.p)
    }
}

/// Norm over time of one path's space norms `v(t_k)`.
pub fn time_norm(values: &[f64], times: &[f64], r: f64) -> Result<f64> {
    check_exponent("r", r)?;
    if values.len() != times.len() || values.is_empty() {
        return Err(LabError::Domain("time samples are empty or mismatched".into()));
    }
    if values.len() == 1 {
        return Ok(values[0]);
    }
    if r.is_infinite() {
        return Ok(values.iter().copied().fold(0.0, f64::max));
    }
    let powered: Vec<f64> = values.iter().map(|v| v.powf(r)).collect();
    Ok(integrate_samples(times, &powered).powf(1.0 / r))
}

/// `(mean over paths of a^ρ)^{1/ρ}`, or the maximum for `ρ = ∞`.
pub fn power_mean(values: &[f64], rho: f64) -> Result<f64> {
    check_exponent("rho", rho)?;
    if values.is_empty() {
        return Err(LabError::Domain("no paths to average over".into()));
    }
    if rho.is_infinite() {
        return Ok(values.iter().copied().fold(0.0, f64::max));
    }
    let n = values.len() as f64;
    Ok((values.iter().map(|v| v.powf(rho)).sum::<f64>() / n).powf(1.0 / rho))
}

/// `‖ ‖ v ‖_{L^r(window)} ‖_{L^ρ(Ω)}` from per-path, per-time space norms
/// sampled at `times`, which must span the window.
pub fn mixed_norm(samples: &[Vec<f64>], times: &[f64], spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    if times.is_empty() || samples.is_empty() {
        return Err(LabError::Domain("empty window".into()));
    }
    if times.len() > 1 {
        let tol = 1e-9 * spec.window_length.max(1.0);
        let first = times[0];
        let last = times[times.len() - 1];
        if (first - spec.window_start).abs() > tol
            || (last - (spec.window_start + spec.window_length)).abs() > tol
        {
            return Err(LabError::Domain(format!(
                "samples cover [{first}, {last}], window is [{}, {}]",
                spec.window_start,
                spec.window_start + spec.window_length
            )));
        }
    }
    let per_path = samples
        .iter()
        .map(|v| time_norm(v, times, spec.r))
        .collect::<Result<Vec<f64>>>()?;
    power_mean(&per_path, spec.rho)
}

/// `(r, p)` with `2 ≤ r < ∞, 2 ≤ p ≤ ∞` and `2/r > 1/2 − 1/p`, or `(∞, 2)`.
pub fn admissible_pair(r: f64, p: f64) -> bool {
    if r.is_infinite() {
        return p == 2.0;
    }
    r >= 2.0 && p >= 2.0 && 2.0 / r > 0.5 - 1.0 / p
}

fn require_admissible(r: f64, p: f64) -> Result<()> {
    if admissible_pair(r, p) {
        Ok(())
    } else {
        Err(LabError::Domain(format!("(r, p) = ({r}, {p}) is not admissible")))
    }
}

/// `2/r + 1/(2p) − 1/4`, the window exponent of the inhomogeneous bound.
pub fn mu_inhomogeneous(r: f64, p: f64) -> Result<f64> {
    require_admissible(r, p)?;
    Ok(2.0 / r + 1.0 / (2.0 * p) - 0.25)
}

/// `2/r − (1/2)(1/2 − 1/p)`, the window exponent of the homogeneous bound.
pub fn mu_homogeneous(r: f64, p: f64) -> Result<f64> {
    require_admissible(r, p)?;
    Ok(2.0 / r - 0.5 * (0.5 - 1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn indicator_norms() {
        let g = Grid::new(2.0, 4001).unwrap();
        let u: Vec<Complex64> = g
            .points()
            .iter()
            .map(|&x| Complex64::new(if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, 0.0))
            .collect();
        assert!((lp_norm_x(&u, 1.0, &g).unwrap() - 1.0).abs() <= 2.0 * g.spacing());
        assert_eq!(lp_norm_x(&u, f64::INFINITY, &g).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = Grid::new(10.0, 2001).unwrap();
        let u: Vec<Complex64> = g.points().iter().map(|&x| Complex64::new((-x * x).exp(), 0.0)).collect();
        let want = (std::f64::consts::PI / 2.0).powf(0.25);
        assert!((lp_norm_x(&u, 2.0, &g).unwrap() - want).abs() < 1e-6);
        let general = lp_norm_x(&u, 2.0 + 1e-12, &g).unwrap();
        assert!((general - want).abs() < 1e-6);
    }

    #[test]
    fn sub_one_exponent_is_rejected() {
        let g = Grid::new(1.0, 16).unwrap();
        let u = vec![Complex64::new(1.0, 0.0); 16];
        assert!(matches!(lp_norm_x(&u, 0.5, &g), Err(LabError::Domain(_))));
    }

    #[test]
    fn mixed_norm_examples() {
        let t = 2.5;
        let times: Vec<f64> = (0..=64).map(|k| t * k as f64 / 64.0).collect();
        let ones = vec![vec![1.0; 65]; 3];
        let spec = MixedNormSpec::new(4.0, 4.0, 2.0, 0.0, t).unwrap();
        assert!((mixed_norm(&ones, &times, &spec).unwrap() - t.powf(0.25)).abs() < 1e-12);

        let single = MixedNormSpec::new(2.0, 4.0, 2.0, 0.3, 1.0).unwrap();
        assert_eq!(mixed_norm(&[vec![0.7]], &[0.3], &single).unwrap(), 0.7);

        assert!(((power_mean(&[3.0, 4.0], 2.0).unwrap()) - (12.5f64).sqrt()).abs() < 1e-15);
        assert!(mixed_norm(&[], &times, &spec).is_err());
        assert!(mixed_norm(&ones, &times[..10], &spec).is_err());
    }

    #[test]
    fn admissibility_and_exponents() {
        assert!(admissible_pair(f64::INFINITY, 2.0));
        assert!(admissible_pair(4.0, 4.0));
        assert!(!admissible_pair(8.0, 4.0));
        assert!(!admissible_pair(f64::INFINITY, 4.0));
        assert!((mu_inhomogeneous(4.0, 4.0).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(mu_inhomogeneous(f64::INFINITY, 2.0).unwrap(), 0.0);
        assert_eq!(mu_inhomogeneous(2.0, 2.0).unwrap(), 1.0);
        assert!((mu_homogeneous(4.0, 4.0).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(mu_homogeneous(f64::INFINITY, 2.0).unwrap(), 0.0);
        assert_eq!(mu_homogeneous(2.0, 2.0).unwrap(), 1.0);
        assert!(mu_homogeneous(8.0, 4.0).is_err());
        assert_eq!(conjugate(4.0), 4.0 / 3.0);
        assert_eq!(conjugate(1.0), f64::INFINITY);
        assert_eq!(conjugate(f64::INFINITY), 1.0);
    }

    fn exponent() -> impl Strategy<Value = f64> {
        prop_oneof![1.0..8.0f64, Just(f64::INFINITY)]
    }

    proptest! {
        #[test]
        fn space_norms_are_monotone(
            pairs in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..2.0f64), 16..64),
            p in exponent(),
        ) {
            let g = Grid::new(1.0, pairs.len()).unwrap();
            let u: Vec<Complex64> = pairs.iter().map(|&(m, ph, _)| Complex64::from_polar(m, ph)).collect();
            let w: Vec<Complex64> = pairs.iter().map(|&(m, _, extra)| Complex64::new(m + extra, 0.0)).collect();
            prop_assert!(lp_norm_x(&u, p, &g).unwrap() <= lp_norm_x(&w, p, &g).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn mixed_norms_are_monotone(
            base in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 9), 1..6),
            bump in 0.0..1.0f64,
            rho in exponent(),
            r in exponent(),
        ) {
            let times: Vec<f64> = (0..9).map(|k| 0.5 * k as f64).collect();
            let spec = MixedNormSpec::new(rho, r, 2.0, 0.0, 4.0).unwrap();
            let bigger: Vec<Vec<f64>> = base.iter().map(|v| v.iter().map(|x| x + bump).collect()).collect();
            let a = mixed_norm(&base, &times, &spec).unwrap();
            let b = mixed_norm(&bigger, &times, &spec).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }
}
