//! Jost solutions, Wronskian, zero-energy resonance and scattering data.
//!
//! The Jost solutions solve `-f'' + V f = λ² f` with `f±(λ, x) → e^{±iλx}`
//! as `x → ±∞`. Writing `f± = e^{±iλx} m±` turns this into
//! `m'' ± 2iλ m' = V m` with the boundary data `m = 1, m' = 0` at the far
//! end of the box, which is integrated inward with classical RK4.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{weighted_l1_norm, Grid, PotentialGrid};
use crate::{Complex64, I};

/// Largest admissible `h·(|λ| + max|V|^{1/2})`.
pub const MAX_RESOLUTION_PRODUCT: f64 = 0.5;
/// Target for the same product per RK4 substep.
const SUBSTEP_PRODUCT: f64 = 0.04;
/// Default zero-energy resonance tolerance.
pub const DEFAULT_RESONANCE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JostSign {
    Plus,
    Minus,
}

impl JostSign {
    fn factor(self) -> f64 {
        match self {
            JostSign::Plus => 1.0,
            JostSign::Minus => -1.0,
        }
    }
}

/// `m±(λ, ·)` and its derivative on the grid.
#[derive(Debug, Clone)]
pub struct JostFunction {
    lambda: f64,
    sign: JostSign,
    grid: Grid,
    m_values: Vec<Complex64>,
    m_derivs: Vec<Complex64>,
    substeps: usize,
}

impl JostFunction {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sign(&self) -> JostSign {
        self.sign
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m_values(&self) -> &[Complex64] {
        &self.m_values
    }

    pub fn m_derivatives(&self) -> &[Complex64] {
        &self.m_derivs
    }

    fn phase(&self, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.sign.factor() * self.lambda * x)
    }

    fn reconstruct(&self, x: f64, m: Complex64, dm: Complex64) -> (Complex64, Complex64) {
        let e = self.phase(x);
        let k = I * (self.sign.factor() * self.lambda);
        (e * m, e * (dm + k * m))
    }

    /// `(f, f')` at grid node `i`.
    pub fn value(&self, i: usize) -> (Complex64, Complex64) {
        self.reconstruct(self.grid.point(i), self.m_values[i], self.m_derivs[i])
    }

    /// `(f, f')` at an arbitrary point of the box, obtained by integrating
    /// from the nearest node.
    pub fn value_at(&self, potential: &PotentialGrid, x: f64) -> Result<(Complex64, Complex64)> {
        if !self.grid.contains(x) {
            return Err(LabError::Domain(format!(
                "x = {x} lies outside the box [-{0}, {0}]",
                self.grid.half_width()
            )));
        }
        let i = self.grid.nearest_index(x);
        let x0 = self.grid.point(i);
        let mut state = (self.m_values[i], self.m_derivs[i]);
        let dx = x - x0;
        if dx != 0.0 {
            let n = self.substeps.max(1);
            let step = dx / n as f64;
            for s in 0..n {
                state = rk4_step(potential, self.lambda, self.sign, x0 + s as f64 * step, step, state);
            }
        }
        Ok(self.reconstruct(x, state.0, state.1))
    }
}

fn rhs(
    potential: &PotentialGrid,
    lambda: f64,
    sign: JostSign,
    x: f64,
    m: Complex64,
    dm: Complex64,
) -> (Complex64, Complex64) {
    let d2 = m * potential.eval(x) - I * (2.0 * sign.factor() * lambda) * dm;
    (dm, d2)
}

fn rk4_step(
    potential: &PotentialGrid,
    lambda: f64,
    sign: JostSign,
    x: f64,
    step: f64,
    (m, dm): (Complex64, Complex64),
) -> (Complex64, Complex64) {
    let half = 0.5 * step;
    let (k1m, k1d) = rhs(potential, lambda, sign, x, m, dm);
    let (k2m, k2d) = rhs(potential, lambda, sign, x + half, m + k1m * half, dm + k1d * half);
    let (k3m, k3d) = rhs(potential, lambda, sign, x + half, m + k2m * half, dm + k2d * half);
    let (k4m, k4d) = rhs(potential, lambda, sign, x + step, m + k3m * step, dm + k3d * step);
    (
        m + (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (step / 6.0),
        dm + (k1d + k2d * 2.0 + k3d * 2.0 + k4d) * (step / 6.0),
    )
}

fn resolution_product(potential: &PotentialGrid, lambda: f64) -> f64 {
    potential.grid().spacing() * (lambda.abs() + potential.max_abs().sqrt())
}

/// Integrates `m±(λ, ·)` from the boundary `x = ±L` across the whole grid.
pub fn jost_solution(potential: &PotentialGrid, lambda: f64, sign: JostSign) -> Result<JostFunction> {
    if !lambda.is_finite() {
        return Err(LabError::Domain(format!("lambda must be finite, got {lambda}")));
    }
    let grid = *potential.grid();
    let product = resolution_product(potential, lambda);
    if product > MAX_RESOLUTION_PRODUCT {
        return Err(LabError::Resolution(format!(
            "h·(|λ| + max|V|^1/2) = {product:.3} exceeds {MAX_RESOLUTION_PRODUCT}; refine the grid"
        )));
    }
    let substeps = ((product / SUBSTEP_PRODUCT).ceil() as usize).max(1);
    let n = grid.n_points();
    let h = grid.spacing();
    let mut m_values = vec![Complex64::new(0.0, 0.0); n];
    let mut m_derivs = vec![Complex64::new(0.0, 0.0); n];
    let mut state = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));

    let order: Box<dyn Iterator<Item = usize>> = match sign {
        JostSign::Plus => Box::new((0..n).rev()),
        JostSign::Minus => Box::new(0..n),
    };
    let step = match sign {
        JostSign::Plus => -h / substeps as f64,
        JostSign::Minus => h / substeps as f64,
    };
    let mut prev: Option<usize> = None;
    for i in order {
        if let Some(p) = prev {
            let x0 = grid.point(p);
            for s in 0..substeps {
                state = rk4_step(potential, lambda, sign, x0 + s as f64 * step, step, state);
            }
        }
        m_values[i] = state.0;
        m_derivs[i] = state.1;
        prev = Some(i);
    }
    Ok(JostFunction {
        lambda,
        sign,
        grid,
        m_values,
        m_derivs,
        substeps,
    })
}

fn check_pair(f_plus: &JostFunction, f_minus: &JostFunction) -> Result<()> {
    if f_plus.grid != f_minus.grid {
        return Err(LabError::Contract("Jost functions live on different grids".into()));
    }
    if f_plus.lambda != f_minus.lambda {
        return Err(LabError::Contract(format!(
            "Jost functions have different λ ({} vs {})",
            f_plus.lambda, f_minus.lambda
        )));
    }
    if f_plus.sign != JostSign::Plus || f_minus.sign != JostSign::Minus {
        return Err(LabError::Contract("expected the pair (f+, f-)".into()));
    }
    Ok(())
}

/// `f₁ f₂' − f₁' f₂` at grid node `i`.
fn wronskian_at(a: &JostFunction, b: &JostFunction, i: usize) -> Complex64 {
    let (fa, dfa) = a.value(i);
    let (fb, dfb) = b.value(i);
    fa * dfb - dfa * fb
}

/// `W(λ) = f₊f₋' − f₊'f₋`, evaluated at the node nearest the origin.
///
/// Derivatives come from the integrated `(m, m')` state rather than from
/// finite differences, so the free value `-2iλ` is reproduced to round-off.
pub fn wronskian(f_plus: &JostFunction, f_minus: &JostFunction) -> Result<Complex64> {
    check_pair(f_plus, f_minus)?;
    Ok(wronskian_at(f_plus, f_minus, f_plus.grid.center_index()))
}

/// `W(λ)` at every node; constant in `x` up to integration error.
pub fn wronskian_profile(f_plus: &JostFunction, f_minus: &JostFunction) -> Result<Vec<Complex64>> {
    check_pair(f_plus, f_minus)?;
    Ok((0..f_plus.grid.n_points())
        .map(|i| wronskian_at(f_plus, f_minus, i))
        .collect())
}

/// `W(λ)` computed from scratch.
pub fn wronskian_at_lambda(potential: &PotentialGrid, lambda: f64) -> Result<Complex64> {
    let fp = jost_solution(potential, lambda, JostSign::Plus)?;
    let fm = jost_solution(potential, lambda, JostSign::Minus)?;
    wronskian(&fp, &fm)
}

/// `true` iff `|W(0)| < tol · max(1, ‖V‖₁)`.
pub fn detect_resonance(potential: &PotentialGrid, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(LabError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let w0 = wronskian_at_lambda(potential, 0.0)?;
    let spec = potential.spec();
    let l1 = weighted_l1_norm(spec, 0, spec.default_box())?;
    Ok(w0.norm() < tol * l1.max(1.0))
}

/// Per-λ scattering record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringData {
    pub lambda: f64,
    pub wronskian: Complex64,
    pub alpha: Complex64,
    pub beta_coeff: Complex64,
    pub transmission: Complex64,
    pub reflection: Complex64,
    pub resonance_at_zero: Option<bool>,
}

/// Decomposes `f₋(λ, ·) = α f₊(λ, ·) + β f₊(−λ, ·)` at the origin and derives
/// `T = −2iλ / W` and `R = α / β`.
pub fn scattering_coefficients(potential: &PotentialGrid, lambda: f64) -> Result<ScatteringData> {
    if lambda == 0.0 {
        return Err(LabError::SingularParameter(
            "scattering coefficients divide by λ; λ = 0 is excluded".into(),
        ));
    }
    let fp = jost_solution(potential, lambda, JostSign::Plus)?;
    let fp_neg = jost_solution(potential, -lambda, JostSign::Plus)?;
    let fm = jost_solution(potential, lambda, JostSign::Minus)?;

    let c = potential.grid().center_index();
    let (a, da) = fp.value(c);
    let (b, db) = fp_neg.value(c);
    let (g, dg) = fm.value(c);
    let det = a * db - b * da;
    let scale = (a.norm() * db.norm()).max(b.norm() * da.norm());
    if det.norm() <= 1e-10 * scale {
        return Err(LabError::Conditioning(format!(
            "matching system at λ = {lambda} is singular (|det| = {:.3e})",
            det.norm()
        )));
    }
    let alpha = (g * db - b * dg) / det;
    let beta = (a * dg - da * g) / det;
    let w = wronskian(&fp, &fm)?;
    let transmission = -2.0 * I * lambda / w;
    let reflection = alpha / beta;
    Ok(ScatteringData {
        lambda,
        wronskian: w,
        alpha,
        beta_coeff: beta,
        transmission,
        reflection,
        resonance_at_zero: None,
    })
}

/// The pair `f₊, f₋` at fixed `λ` with its Wronskian, ready to evaluate the
/// resolvent kernel `R_V(λ² + i0)(x, y) = f₊(λ, max) f₋(λ, min) / W(λ)`.
#[derive(Debug, Clone)]
pub struct JostResolvent {
    potential: PotentialGrid,
    f_plus: JostFunction,
    f_minus: JostFunction,
    wronskian: Complex64,
}

/// `|W|` below which the kernel is refused.
const NEAR_RESONANCE_TOL: f64 = 1e-10;

impl JostResolvent {
    pub fn new(potential: &PotentialGrid, lambda: f64) -> Result<Self> {
        if lambda == 0.0 {
            return Err(LabError::SingularParameter(
                "the Jost resolvent requires λ ≠ 0".into(),
            ));
        }
        let f_plus = jost_solution(potential, lambda, JostSign::Plus)?;
        let f_minus = jost_solution(potential, lambda, JostSign::Minus)?;
        let wronskian = wronskian(&f_plus, &f_minus)?;
        if wronskian.norm() < NEAR_RESONANCE_TOL * lambda.abs().max(1.0) {
            return Err(LabError::NearResonance(format!(
                "|W({lambda})| = {:.3e}",
                wronskian.norm()
            )));
        }
        Ok(Self {
            potential: potential.clone(),
            f_plus,
            f_minus,
            wronskian,
        })
    }

    pub fn wronskian(&self) -> Complex64 {
        self.wronskian
    }

    pub fn kernel(&self, x: f64, y: f64) -> Result<Complex64> {
        let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
        let (fp, _) = self.f_plus.value_at(&self.potential, hi)?;
        let (fm, _) = self.f_minus.value_at(&self.potential, lo)?;
        Ok(fp * fm / self.wronskian)
    }
}

/// Outgoing resolvent kernel at energy `λ²` built from Jost solutions.
pub fn resolvent_kernel_jost(potential: &PotentialGrid, lambda: f64, x: f64, y: f64) -> Result<Complex64> {
    JostResolvent::new(potential, lambda)?.kernel(x, y)
}

/// Geometric λ grid on `[0.05, 4√λ₀ + 1]`.
pub fn sweep_lambda_grid(lambda0: f64, n: usize) -> Vec<f64> {
    let lo: f64 = 0.05;
    let hi: f64 = 4.0 * lambda0.max(0.0).sqrt() + 1.0;
    if n <= 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Scattering data over a λ sweep.
pub fn scattering_sweep(potential: &PotentialGrid, lambdas: &[f64]) -> Result<Vec<ScatteringData>> {
    lambdas
        .iter()
        .map(|&l| scattering_coefficients(potential, l))
        .collect()
}

/// Writes a sweep as CSV (`lambda, Re W, Im W, |T|, |R|, |alpha|, |beta|`).
pub fn write_sweep_csv<W: Write>(mut out: W, data: &[ScatteringData]) -> std::io::Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "lambda,re_w,im_w,abs_t,abs_r,abs_alpha,abs_beta")?;
    for d in data {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            d.lambda,
            d.wronskian.re,
            d.wronskian.im,
            d.transmission.norm(),
            d.reflection.norm(),
            d.alpha.norm(),
            d.beta_coeff.norm()
        )?;
    }
    Ok(())
}
