//! Spatial grid, potential families and weighted `L¹` norms.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::simpson;

/// Uniform grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(LabError::InvalidGrid(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        if n_points < Self::MIN_POINTS {
            return Err(LabError::InvalidGrid(format!(
                "n_points must be at least {}, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self {
            half_width,
            n_points,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    /// `x_i`, computed so that `x_i = -x_{n-1-i}` holds exactly.
    pub fn point(&self, i: usize) -> f64 {
        let n1 = (self.n_points - 1) as f64;
        self.half_width * (2.0 * i as f64 - n1) / n1
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Index of the node closest to `x = 0` (the left one of the central
    /// pair for an even number of points).
    pub fn center_index(&self) -> usize {
        (self.n_points - 1) / 2
    }

    /// Nearest node to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let t = (x + self.half_width) / self.spacing();
        (t.round().max(0.0) as usize).min(self.n_points - 1)
    }

    pub fn contains(&self, x: f64) -> bool {
        x.abs() <= self.half_width * (1.0 + 1e-12)
    }
}

/// Built-in potential families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    /// `V ≡ 0`.
    Zero,
    /// `A·exp(-(x/w)²)`.
    Gaussian,
    /// `A·sech²(x/w)`.
    SechSquared,
    /// `A` on `|x| ≤ w`, zero outside.
    SquareWell,
    /// Piecewise-linear interpolation of `(x, V)` nodes, zero outside.
    CustomTable,
}

/// Analytic description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

fn default_width() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self {
            family: PotentialFamily::Zero,
            amplitude: 0.0,
            width: 1.0,
            table: None,
        }
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self {
            family: PotentialFamily::Gaussian,
            amplitude,
            width,
            table: None,
        }
    }

    pub fn sech_squared(amplitude: f64, width: f64) -> Self {
        Self {
            family: PotentialFamily::SechSquared,
            amplitude,
            width,
            table: None,
        }
    }

    pub fn square_well(amplitude: f64, width: f64) -> Self {
        Self {
            family: PotentialFamily::SquareWell,
            amplitude,
            width,
            table: None,
        }
    }

    pub fn custom_table(table: Vec<(f64, f64)>) -> Self {
        Self {
            family: PotentialFamily::CustomTable,
            amplitude: 0.0,
            width: 1.0,
            table: Some(table),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(LabError::Validation("amplitude must be finite".into()));
        }
        match self.family {
            PotentialFamily::Zero => Ok(()),
            PotentialFamily::Gaussian | PotentialFamily::SechSquared | PotentialFamily::SquareWell => {
                if !(self.width.is_finite() && self.width > 0.0) {
                    return Err(LabError::Validation(format!(
                        "width must be positive and finite, got {}",
                        self.width
                    )));
                }
                Ok(())
            }
            PotentialFamily::CustomTable => {
                let table = self.table.as_ref().ok_or_else(|| {
                    LabError::Validation("custom_table family requires a table".into())
                })?;
                if table.len() < 2 {
                    return Err(LabError::Validation(
                        "custom table needs at least two nodes".into(),
                    ));
                }
                if table.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
                    return Err(LabError::Validation(
                        "custom table contains non-finite entries".into(),
                    ));
                }
                if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(LabError::Validation(
                        "custom table abscissae must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Pointwise value `V(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let a = self.amplitude;
        match self.family {
            PotentialFamily::Zero => 0.0,
            PotentialFamily::Gaussian => {
                let s = x / self.width;
                a * (-s * s).exp()
            }
            PotentialFamily::SechSquared => {
                let c = (x / self.width).cosh();
                if c.is_infinite() {
                    0.0
                } else {
                    a / (c * c)
                }
            }
            PotentialFamily::SquareWell => {
                if x.abs() <= self.width {
                    a
                } else {
                    0.0
                }
            }
            PotentialFamily::CustomTable => {
                let table = match &self.table {
                    Some(t) => t,
                    None => return 0.0,
                };
                interpolate_table(table, x)
            }
        }
    }

    /// True when `V(-x) = V(x)` holds by construction.
    pub fn is_even(&self) -> bool {
        !matches!(self.family, PotentialFamily::CustomTable)
    }

    /// Length scale on which the potential varies or decays.
    fn decay_scale(&self) -> f64 {
        match self.family {
            PotentialFamily::CustomTable => self
                .table
                .as_ref()
                .map(|t| {
                    let lo = t.first().map(|p| p.0.abs()).unwrap_or(1.0);
                    let hi = t.last().map(|p| p.0.abs()).unwrap_or(1.0);
                    lo.max(hi).max(1e-3)
                })
                .unwrap_or(1.0),
            _ => self.width,
        }
    }

    /// Smallest node spacing of a custom table; the width otherwise.
    fn feature_scale(&self) -> f64 {
        match (&self.family, &self.table) {
            (PotentialFamily::CustomTable, Some(t)) => t
                .windows(2)
                .map(|w| w[1].0 - w[0].0)
                .fold(f64::INFINITY, f64::min),
            _ => self.width,
        }
    }

    /// Points inside `(-b, b)` where the integrand of the weighted norm may
    /// have a kink or jump.
    fn breakpoints(&self, b: f64) -> Vec<f64> {
        let mut pts = vec![-b, 0.0, b];
        match self.family {
            PotentialFamily::SquareWell => {
                pts.push(-self.width);
                pts.push(self.width);
            }
            PotentialFamily::CustomTable => {
                if let Some(t) = &self.table {
                    pts.extend(t.iter().map(|p| p.0));
                    // |V| has a kink wherever a linear segment crosses zero
                    for w in t.windows(2) {
                        let ((x0, v0), (x1, v1)) = (w[0], w[1]);
                        if v0 * v1 < 0.0 {
                            pts.push(x0 - v0 * (x1 - x0) / (v1 - v0));
                        }
                    }
                }
            }
            _ => {}
        }
        pts.retain(|x| x.abs() <= b);
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * (1.0 + b.abs()));
        pts
    }

    /// Quadrature box beyond which every built-in family is negligible.
    pub fn default_box(&self) -> f64 {
        20.0 * self.decay_scale()
    }
}

fn interpolate_table(table: &[(f64, f64)], x: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if x < first.0 || x > last.0 {
        return 0.0;
    }
    let idx = table.partition_point(|p| p.0 <= x);
    if idx == 0 {
        return first.1;
    }
    if idx >= table.len() {
        return last.1;
    }
    let (x0, v0) = table[idx - 1];
    let (x1, v1) = table[idx];
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}

/// A potential sampled on a grid, together with its analytic source so
/// that integrators can evaluate it between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    grid: Grid,
    values: Vec<f64>,
    spec: PotentialSpec,
}

impl PotentialGrid {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// Evaluates the underlying potential off the grid.
    pub fn eval(&self, x: f64) -> f64 {
        self.spec.eval(x)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Samples `spec` on `grid`.
pub fn sample_potential(spec: &PotentialSpec, grid: &Grid) -> Result<PotentialGrid> {
    spec.validate()?;
    if let (PotentialFamily::CustomTable, Some(table)) = (spec.family, &spec.table) {
        let lo = table[0].0;
        let hi = table[table.len() - 1].0;
        let l = grid.half_width();
        if lo > -l || hi < l {
            return Err(LabError::Domain(format!(
                "custom table covers [{lo}, {hi}] but the grid needs [{}, {l}]",
                -l
            )));
        }
    }
    let values: Vec<f64> = grid.points().into_iter().map(|x| spec.eval(x)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(LabError::Validation(format!(
            "potential is not finite at x = {}",
            grid.point(i)
        )));
    }
    Ok(PotentialGrid {
        grid: *grid,
        values,
        spec: spec.clone(),
    })
}

const MAX_DOUBLINGS: usize = 12;
const NORM_RTOL: f64 = 1e-13;

/// `∫ |V(x)| (1 + |x|)^j dx` by composite Simpson on `[-box, box]`, doubling
/// the box until the value stabilises.
pub fn weighted_l1_norm(spec: &PotentialSpec, j: u32, quadrature_box: f64) -> Result<f64> {
    if j > 2 {
        return Err(LabError::Domain(format!("weight exponent j must be 0, 1 or 2, got {j}")));
    }
    if !(quadrature_box.is_finite() && quadrature_box > 0.0) {
        return Err(LabError::Domain(format!(
            "quadrature box must be positive, got {quadrature_box}"
        )));
    }
    spec.validate()?;
    if spec.family == PotentialFamily::Zero || spec.amplitude == 0.0 && spec.table.is_none() {
        return Ok(0.0);
    }
    let step = spec.feature_scale().min(spec.decay_scale()) / 400.0;
    let integrand = |x: f64| spec.eval(x).abs() * (1.0 + x.abs()).powi(j as i32);
    let on_box = |b: f64| -> f64 {
        let pts = spec.breakpoints(b);
        pts.windows(2)
            .map(|w| {
                let len = w[1] - w[0];
                let n = ((len / step).ceil() as usize).clamp(16, 1 << 22);
                // endpoints are taken as one-sided limits so jumps at the
                // breakpoints are attributed to the correct segment
                let eps = 1e-13 * len;
                let f = |x: f64| integrand(x.clamp(w[0] + eps, w[1] - eps));
                simpson(f, w[0], w[1], n)
            })
            .sum()
    };
    let mut b = quadrature_box;
    let mut prev = on_box(b);
    for _ in 0..MAX_DOUBLINGS {
        b *= 2.0;
        let next = on_box(b);
        if (next - prev).abs() <= NORM_RTOL * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(LabError::Divergence(format!(
        "weighted L1 norm (j = {j}) still changing after doubling the box to {b}"
    )))
}

/// High-energy threshold `‖V‖₁²`.
pub fn lambda0(spec: &PotentialSpec) -> Result<f64> {
    let n = weighted_l1_norm(spec, 0, spec.default_box())?;
    Ok(n * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(10.0, 201).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(1.0, 15).is_err());
        assert!(Grid::new(0.0, 32).is_err());
        assert!(Grid::new(f64::NAN, 32).is_err());
    }

    #[test]
    fn grid_is_symmetric_and_uniform() {
        let g = Grid::new(3.0, 64).unwrap();
        let x = g.points();
        assert_eq!(x[0], -3.0);
        assert_eq!(x[63], 3.0);
        for i in 0..64 {
            assert_eq!(x[i], -x[63 - i]);
        }
        for w in x.windows(2) {
            assert!((w[1] - w[0] - g.spacing()).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_forms_at_center() {
        let g = grid();
        let c = g.center_index();
        assert_eq!(g.point(c), 0.0);
        let z = sample_potential(&PotentialSpec::zero(), &g).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let gs = sample_potential(&PotentialSpec::gaussian(3.0, 1.0), &g).unwrap();
        assert_eq!(gs.values()[c], 3.0);
        let ss = sample_potential(&PotentialSpec::sech_squared(-2.0, 1.0), &g).unwrap();
        assert_eq!(ss.values()[c], -2.0);
    }

    #[test]
    fn custom_table_must_cover_box() {
        let g = grid();
        let short = PotentialSpec::custom_table(vec![(-5.0, 0.0), (0.0, 1.0), (5.0, 0.0)]);
        assert!(matches!(sample_potential(&short, &g), Err(LabError::Domain(_))));
        let full = PotentialSpec::custom_table(vec![(-10.0, 0.0), (0.0, 1.0), (10.0, 0.0)]);
        let p = sample_potential(&full, &g).unwrap();
        assert!((p.values()[g.nearest_index(5.0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn custom_table_rejects_non_finite() {
        let bad = PotentialSpec::custom_table(vec![(-10.0, f64::NAN), (10.0, 0.0)]);
        assert!(matches!(sample_potential(&bad, &grid()), Err(LabError::Validation(_))));
    }

    #[test]
    fn weighted_norms_match_antiderivatives() {
        let z = weighted_l1_norm(&PotentialSpec::zero(), 1, 10.0).unwrap();
        assert_eq!(z, 0.0);
        let g = weighted_l1_norm(&PotentialSpec::gaussian(3.0, 1.0), 0, 20.0).unwrap();
        assert!((g - 3.0 * PI.sqrt()).abs() < 1e-10, "{g}");
        let s = weighted_l1_norm(&PotentialSpec::sech_squared(-2.0, 1.0), 0, 20.0).unwrap();
        assert!((s - 4.0).abs() < 1e-10, "{s}");
        // ∫ 2·|x|·|A|·exp(-x²) = |A| for the j = 1 excess
        let g1 = weighted_l1_norm(&PotentialSpec::gaussian(3.0, 1.0), 1, 20.0).unwrap();
        assert!((g1 - 3.0 * PI.sqrt() - 3.0).abs() < 1e-10, "{}", g1 - 3.0 * PI.sqrt() - 3.0);
        let sq = weighted_l1_norm(&PotentialSpec::square_well(-1.5, 2.0), 0, 10.0).unwrap();
        assert!((sq - 6.0).abs() < 1e-12);
    }

    #[test]
    fn weight_exponent_out_of_range() {
        assert!(matches!(
            weighted_l1_norm(&PotentialSpec::gaussian(1.0, 1.0), 3, 10.0),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn lambda0_values() {
        assert_eq!(lambda0(&PotentialSpec::zero()).unwrap(), 0.0);
        let s = lambda0(&PotentialSpec::sech_squared(-2.0, 1.0)).unwrap();
        assert!((s - 16.0).abs() < 1e-9);
        let g = lambda0(&PotentialSpec::gaussian(3.0, 1.0)).unwrap();
        assert!((g - 9.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn box_doubling_is_converged_past_twenty_widths() {
        for spec in [
            PotentialSpec::gaussian(3.0, 1.0),
            PotentialSpec::sech_squared(-2.0, 0.5),
            PotentialSpec::square_well(1.0, 1.5),
        ] {
            let b = 20.0 * spec.width;
            let a = weighted_l1_norm(&spec, 1, b).unwrap();
            let c = weighted_l1_norm(&spec, 1, 2.0 * b).unwrap();
            assert!((a - c).abs() < 1e-10, "{spec:?}: {a} vs {c}");
        }
    }
}
