//! Finite-difference Hamiltonian `H = −Δ_h + V` with Dirichlet walls, its
//! eigendecomposition, and the operators built on it: propagation
//! `e^{−iτH}`, removal of bound states, the free resolvent and Born series,
//! and spectral densities from the resolvent jump across the real axis.
//!
//! Energies are always `E`; where a momentum appears it is `√E`.

use std::f64::consts::PI;
use std::io::Write;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd_scratch, tridiagonal_self_adjoint_evd, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::{Accum, Col, Mat, MatRef, Par, Spec};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{lambda0, weighted_l1_norm, Grid, PotentialGrid};
use crate::quadrature::integrate_samples;
use crate::resolvent::solve_shifted_tridiagonal;
use crate::{Complex64, I};

pub const DEFAULT_SIZE_CAP: usize = 8192;

/// Tridiagonal `H` with `2/h² + V(x_i)` on the diagonal and `−1/h²` off it,
/// together with its eigenpairs (ascending, orthonormal in plain ℓ²).
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    potential: PotentialGrid,
    diag: Vec<f64>,
    off: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
    bound_states: Vec<usize>,
}

pub fn build_hamiltonian(potential: &PotentialGrid) -> Result<DiscreteHamiltonian> {
    build_hamiltonian_capped(potential, DEFAULT_SIZE_CAP)
}

pub fn build_hamiltonian_capped(potential: &PotentialGrid, cap: usize) -> Result<DiscreteHamiltonian> {
    let grid = potential.grid();
    let n = grid.n_points();
    if n > cap {
        return Err(LabError::Size(format!(
            "{n} grid points exceed the dense eigensolver cap of {cap}"
        )));
    }
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<f64> = potential.values().iter().map(|v| 2.0 * inv_h2 + v).collect();
    let off = -inv_h2;

    let d = Col::<f64>::from_fn(n, |i| diag[i]);
    let e = Col::<f64>::from_fn(n, |_| off);
    let mut s = Col::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let req = self_adjoint_evd_scratch::<f64>(n, ComputeEigenvectors::Yes, Par::Seq, Spec::default());
    let mut buf = MemBuffer::new(req);
    tridiagonal_self_adjoint_evd(
        d.as_diagonal(),
        e.as_diagonal(),
        s.as_diagonal_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Spec::default(),
    )
    .map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;

    let eigenvalues: Vec<f64> = (0..n).map(|i| s[i]).collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Eigensolver("non-finite eigenvalue".into()));
    }
    let bound_states = (0..n).filter(|&i| eigenvalues[i] < 0.0).collect();
    Ok(DiscreteHamiltonian {
        potential: potential.clone(),
        diag,
        off,
        eigenvalues,
        eigenvectors: u,
        bound_states,
    })
}

impl DiscreteHamiltonian {
    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    pub fn potential(&self) -> &PotentialGrid {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.col(k).iter().copied().collect()
    }

    pub fn eigenvectors(&self) -> MatRef<'_, f64> {
        self.eigenvectors.as_ref()
    }

    pub fn bound_state_indices(&self) -> &[usize] {
        &self.bound_states
    }

    /// Matrix entry `H_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i.abs_diff(j) == 1 {
            self.off
        } else {
            0.0
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(LabError::Contract(format!(
                "vector has {len} entries, operator acts on {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// `H u`.
    pub fn apply(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(u.len())?;
        let n = u.len();
        Ok((0..n)
            .map(|i| {
                let mut acc = u[i] * self.diag[i];
                if i > 0 {
                    acc += u[i - 1] * self.off;
                }
                if i + 1 < n {
                    acc += u[i + 1] * self.off;
                }
                acc
            })
            .collect())
    }

    /// Coefficients `c_k = ⟨u, v_k⟩`.
    pub fn eigen_coefficients(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(u.len())?;
        let parts = split(u);
        let n = self.dim();
        let mut out = Mat::<f64>::zeros(n, 2);
        matmul(
            out.as_mut(),
            Accum::Replace,
            self.eigenvectors.transpose(),
            parts.as_ref(),
            1.0,
            Par::Seq,
        );
        Ok(join(out.as_ref(), 0))
    }

    /// `Σ c_k v_k`.
    pub fn synthesize(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(c.len())?;
        let parts = split(c);
        let mut out = Mat::<f64>::zeros(self.dim(), 2);
        matmul(
            out.as_mut(),
            Accum::Replace,
            self.eigenvectors.as_ref(),
            parts.as_ref(),
            1.0,
            Par::Seq,
        );
        Ok(join(out.as_ref(), 0))
    }

    /// Removes the components along negative-energy eigenvectors.
    pub fn project_ac(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(u.len())?;
        let mut out = u.to_vec();
        for &k in &self.bound_states {
            let v = self.eigenvectors.col(k);
            let c: Complex64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for (o, b) in out.iter_mut().zip(v.iter()) {
                *o -= c * b;
            }
        }
        Ok(out)
    }

    /// `e^{−iτH} u`.
    pub fn propagate(&self, tau: f64, u: &[Complex64]) -> Result<Vec<Complex64>> {
        if !tau.is_finite() {
            return Err(LabError::Domain(format!("τ must be finite, got {tau}")));
        }
        let mut c = self.eigen_coefficients(u)?;
        for (ck, lam) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= Complex64::from_polar(1.0, -tau * lam);
        }
        self.synthesize(&c)
    }

    /// Modes of `u` whose coefficient exceeds `rel_threshold · max|c_k|`.
    pub fn active_basis(&self, u: &[Complex64], rel_threshold: f64) -> Result<ActiveBasis> {
        let c = self.eigen_coefficients(u)?;
        let cmax = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let indices: Vec<usize> = (0..c.len())
            .filter(|&k| c[k].norm() > rel_threshold * cmax)
            .collect();
        let coefficients = indices.iter().map(|&k| c[k]).collect();
        Ok(self.mode_basis(indices, coefficients))
    }

    /// The given eigenmodes, carrying the given coefficients.
    pub fn mode_basis(&self, indices: Vec<usize>, coefficients: Vec<Complex64>) -> ActiveBasis {
        let vectors = Mat::<f64>::from_fn(self.dim(), indices.len(), |i, j| {
            self.eigenvectors[(i, indices[j])]
        });
        ActiveBasis {
            eigenvalues: indices.iter().map(|&k| self.eigenvalues[k]).collect(),
            coefficients,
            indices,
            vectors,
        }
    }

    /// Minimum gap between eigenvalue `k` and its neighbours.
    pub fn eigenvalue_spacing(&self, k: usize) -> f64 {
        let ev = &self.eigenvalues;
        let mut gap = f64::INFINITY;
        if k > 0 {
            gap = gap.min(ev[k] - ev[k - 1]);
        }
        if k + 1 < ev.len() {
            gap = gap.min(ev[k + 1] - ev[k]);
        }
        gap
    }
}

fn split(u: &[Complex64]) -> Mat<f64> {
    Mat::<f64>::from_fn(u.len(), 2, |i, j| if j == 0 { u[i].re } else { u[i].im })
}

fn join(m: MatRef<'_, f64>, col: usize) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|i| Complex64::new(m[(i, col)], m[(i, col + 1)]))
        .collect()
}

/// The eigenmodes actually present in some initial state, kept as a dense
/// block so that many propagated states can be formed with one real GEMM.
#[derive(Debug, Clone)]
pub struct ActiveBasis {
    indices: Vec<usize>,
    eigenvalues: Vec<f64>,
    coefficients: Vec<Complex64>,
    vectors: Mat<f64>,
}

impl ActiveBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Grid functions `Σ_k c_k(j) v_k` for each coefficient vector `c(j)`
    /// (indexed like the active modes).
    pub fn synthesize_many(&self, coeffs: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        let m = self.len();
        if let Some(bad) = coeffs.iter().find(|c| c.len() != m) {
            return Err(LabError::Contract(format!(
                "coefficient vector has {} entries, basis has {m}",
                bad.len()
            )));
        }
        let cols = coeffs.len();
        let rhs = Mat::<f64>::from_fn(m, 2 * cols, |k, j| {
            let z = coeffs[j / 2][k];
            if j % 2 == 0 {
                z.re
            } else {
                z.im
            }
        });
        let mut out = Mat::<f64>::zeros(self.vectors.nrows(), 2 * cols);
        matmul(
            out.as_mut(),
            Accum::Replace,
            self.vectors.as_ref(),
            rhs.as_ref(),
            1.0,
            Par::Seq,
        );
        Ok((0..cols).map(|j| join(out.as_ref(), 2 * j)).collect())
    }

    /// `e^{−iτH} u` for every `τ`.
    pub fn propagate_many(&self, taus: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let coeffs: Vec<Vec<Complex64>> = taus
            .iter()
            .map(|&tau| self.evolved_coefficients(tau))
            .collect();
        self.synthesize_many(&coeffs)
    }

    pub fn evolved_coefficients(&self, tau: f64) -> Vec<Complex64> {
        self.coefficients
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, lam)| c * Complex64::from_polar(1.0, -tau * lam))
            .collect()
    }
}

/// Sign of the imaginary part of the spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// `R₀(E ± i0)(x, y) = ±i/(2√E) · e^{±i|x−y|√E}`.
pub fn free_resolvent_kernel(energy: f64, branch: Branch, x: f64, y: f64) -> Result<Complex64> {
    if !(energy > 0.0) {
        return Err(LabError::Domain(format!(
            "the free kernel needs positive energy, got {energy}"
        )));
    }
    let k = energy.sqrt();
    let s = branch.sign();
    Ok(I * (s / (2.0 * k)) * Complex64::from_polar(1.0, s * k * (x - y).abs()))
}

/// Partial Born sum and the sup norm of every term.
#[derive(Debug, Clone)]
pub struct BornSeries {
    pub partial_sum: Vec<Complex64>,
    pub term_sup_norms: Vec<f64>,
}

impl BornSeries {
    /// `‖term_{n+1}‖_∞ / ‖term_n‖_∞`, skipping vanishing terms.
    pub fn ratios(&self) -> Vec<f64> {
        self.term_sup_norms
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Applies `R₀` as an integral operator by trapezoid quadrature on the grid.
struct FreeResolventQuadrature {
    kernel: Vec<Complex64>,
    weights: Vec<f64>,
}

impl FreeResolventQuadrature {
    fn new(grid: &Grid, energy: f64, branch: Branch) -> Result<Self> {
        let n = grid.n_points();
        let h = grid.spacing();
        let kernel = (0..n)
            .map(|d| free_resolvent_kernel(energy, branch, d as f64 * h, 0.0))
            .collect::<Result<Vec<_>>>()?;
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self { kernel, weights })
    }

    fn apply(&self, g: &[Complex64]) -> Vec<Complex64> {
        let n = g.len();
        let wg: Vec<Complex64> = g.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        (0..n)
            .map(|i| {
                wg.iter()
                    .enumerate()
                    .map(|(j, v)| self.kernel[i.abs_diff(j)] * v)
                    .sum()
            })
            .collect()
    }
}

fn sup_norm(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Σ_{n ≤ n_max} R₀(−V R₀)ⁿ f` at energy `E > ‖V‖₁²`, sampled on the grid
/// of `potential`; `f` must be negligible near the box edges.
pub fn born_series_apply(
    potential: &PotentialGrid,
    energy: f64,
    branch: Branch,
    f: &[Complex64],
    n_max: usize,
) -> Result<BornSeries> {
    let grid = potential.grid();
    if f.len() != grid.n_points() {
        return Err(LabError::Contract(format!(
            "f has {} samples, grid has {}",
            f.len(),
            grid.n_points()
        )));
    }
    let threshold = lambda0(potential.spec())?;
    if !(energy > threshold) {
        return Err(LabError::ConvergenceRegion(format!(
            "Born series needs E > ‖V‖₁² = {threshold}, got E = {energy}"
        )));
    }
    let r0 = FreeResolventQuadrature::new(grid, energy, branch)?;
    let v = potential.values();
    let mut term = r0.apply(f);
    let mut sum = term.clone();
    let mut norms = vec![sup_norm(&term)];
    for _ in 0..n_max {
        let vt: Vec<Complex64> = term.iter().zip(v).map(|(t, vi)| -t * vi).collect();
        term = r0.apply(&vt);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        norms.push(sup_norm(&term));
    }
    Ok(BornSeries {
        partial_sum: sum,
        term_sup_norms: norms,
    })
}

/// `‖V‖₁ / (2√E)`, the geometric ratio bounding successive Born terms.
pub fn born_ratio_bound(potential: &PotentialGrid, energy: f64) -> Result<f64> {
    let spec = potential.spec();
    Ok(weighted_l1_norm(spec, 0, spec.default_box())? / (2.0 * energy.sqrt()))
}

/// What the spectral density is taken of.
#[derive(Debug, Clone)]
pub enum DensityMode {
    /// `⟨E(dλ) f, f⟩` for a fixed grid vector (plain ℓ² pairing).
    Vector(Vec<Complex64>),
    /// `N⁻¹ tr E(dλ)`.
    Trace,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDensityEstimate {
    pub lambda_grid: Vec<f64>,
    pub density: Vec<f64>,
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

impl SpectralDensityEstimate {
    /// Mass over the whole sampled interval.
    pub fn integral(&self) -> f64 {
        integrate_samples(&self.lambda_grid, &self.density)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# schema=1")?;
        writeln!(out, "lambda,density")?;
        for (l, d) in self.lambda_grid.iter().zip(&self.density) {
            writeln!(out, "{l},{d}")?;
        }
        Ok(())
    }
}

/// `(1/2πi)(⟨R(λ+iε)f, f⟩ − ⟨R(λ−iε)f, f⟩)` on `n_lambda` points of `[a, b]`.
///
/// Vector mode performs two tridiagonal resolvent solves per point; trace
/// mode sums Lorentzians over the eigenvalues.
pub fn stone_spectral_density(
    h: &DiscreteHamiltonian,
    a: f64,
    b: f64,
    epsilon: f64,
    n_lambda: usize,
    mode: &DensityMode,
) -> Result<SpectralDensityEstimate> {
    if !(a < b) {
        return Err(LabError::Domain(format!("need a < b, got [{a}, {b}]")));
    }
    if !(epsilon > 0.0) {
        return Err(LabError::Domain(format!("ε must be positive, got {epsilon}")));
    }
    if n_lambda < 2 {
        return Err(LabError::Domain("n_lambda must be at least 2".into()));
    }
    let step = (b - a) / (n_lambda - 1) as f64;
    let lambda_grid: Vec<f64> = (0..n_lambda).map(|i| a + i as f64 * step).collect();
    let mut warnings = Vec::new();
    if step > 0.25 * epsilon {
        warnings.push(format!(
            "λ step {step:.3e} exceeds ε/4 = {:.3e}; the Lorentzian peaks are under-resolved",
            0.25 * epsilon
        ));
    }
    let density = match mode {
        DensityMode::Vector(f) => {
            h.check_len(f.len())?;
            lambda_grid
                .iter()
                .map(|&l| {
                    let up = solve_shifted_tridiagonal(&h.diag, h.off, Complex64::new(l, epsilon), f)?;
                    let down = solve_shifted_tridiagonal(&h.diag, h.off, Complex64::new(l, -epsilon), f)?;
                    let pair = |u: &[Complex64]| -> Complex64 {
                        u.iter().zip(f).map(|(x, y)| x * y.conj()).sum()
                    };
                    Ok(((pair(&up) - pair(&down)) / (2.0 * PI * I)).re)
                })
                .collect::<Result<Vec<f64>>>()?
        }
        DensityMode::Trace => {
            let n = h.dim() as f64;
            lambda_grid
                .iter()
                .map(|&l| {
                    h.eigenvalues
                        .iter()
                        .map(|&ev| epsilon / PI / ((l - ev).powi(2) + epsilon * epsilon))
                        .sum::<f64>()
                        / n
                })
                .collect()
        }
    };
    Ok(SpectralDensityEstimate {
        lambda_grid,
        density,
        epsilon,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_potential, PotentialSpec};
    use crate::resolvent::LargeBoxResolvent;

    fn ham(spec: PotentialSpec, l: f64, n: usize) -> DiscreteHamiltonian {
        let g = Grid::new(l, n).unwrap();
        build_hamiltonian(&sample_potential(&spec, &g).unwrap()).unwrap()
    }

    fn cvec(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    fn norm(a: &[Complex64]) -> f64 {
        a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Number of eigenvalues of the tridiagonal matrix below `x` (Sturm count).
    fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for (i, d) in diag.iter().enumerate() {
            let prev = if i == 0 { 0.0 } else { off * off / q };
            q = d - x - prev;
            if q == 0.0 {
                q = 1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bisect_eigenvalue(diag: &[f64], off: f64, k: usize) -> f64 {
        let (mut lo, mut hi) = (-1e6, 1e9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(diag, off, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn free_spectrum_matches_dirichlet_formula() {
        let h = ham(PotentialSpec::zero(), 10.0, 256);
        let n = h.dim();
        let dx = h.grid().spacing();
        for (k, ev) in h.eigenvalues().iter().enumerate() {
            let s = ((k + 1) as f64 * PI / (2.0 * (n + 1) as f64)).sin();
            let exact = 4.0 / (dx * dx) * s * s;
            assert!((ev - exact).abs() < 1e-9 * exact.max(1.0), "k={k}");
        }
        assert!(h.bound_state_indices().is_empty());
    }

    #[test]
    fn eigenvalues_agree_with_sturm_bisection() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 15.0, 300);
        for &k in &[0usize, 5, 150, 299] {
            let ev = bisect_eigenvalue(h.diagonal(), h.off_diagonal(), k);
            assert!((ev - h.eigenvalues()[k]).abs() < 1e-9 * ev.abs().max(1.0));
        }
    }

    #[test]
    fn eigenpairs_are_orthonormal_and_exact() {
        let h = ham(PotentialSpec::sech_squared(-2.0, 1.0), 20.0, 400);
        let u = h.eigenvectors();
        let n = h.dim();
        let mut gram = Mat::<f64>::zeros(n, n);
        matmul(gram.as_mut(), Accum::Replace, u.transpose(), u, 1.0, Par::Seq);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-10);
            }
        }
        for k in 0..n {
            let v = cvec(&h.eigenvector(k));
            let hv = h.apply(&v).unwrap();
            let lam = h.eigenvalues()[k];
            let r: Vec<Complex64> = hv.iter().zip(&v).map(|(a, b)| a - b * lam).collect();
            assert!(norm(&r) < 1e-8 * lam.abs().max(1.0));
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(h.entry(i, j), h.entry(j, i));
            }
        }
    }

    #[test]
    fn reflectionless_well_has_one_bound_state() {
        let h = ham(PotentialSpec::sech_squared(-2.0, 1.0), 20.0, 4096);
        assert_eq!(h.bound_state_indices(), &[0]);
        assert!((h.eigenvalues()[0] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn repulsive_gaussian_has_no_bound_states() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 40.0, 512);
        assert!(h.bound_state_indices().is_empty());
    }

    #[test]
    fn size_cap_is_enforced() {
        let g = Grid::new(10.0, 600).unwrap();
        let v = sample_potential(&PotentialSpec::zero(), &g).unwrap();
        assert!(matches!(build_hamiltonian_capped(&v, 512), Err(LabError::Size(_))));
    }

    #[test]
    fn projection_removes_bound_state_only() {
        let h = ham(PotentialSpec::sech_squared(-2.0, 1.0), 20.0, 400);
        let b = cvec(&h.eigenvector(0));
        assert!(norm(&h.project_ac(&b).unwrap()) < 1e-8);
        let w: Vec<Complex64> = (0..h.dim())
            .map(|i| Complex64::new(h.eigenvector(3)[i], 2.0 * h.eigenvector(7)[i]))
            .collect();
        let mix: Vec<Complex64> = w.iter().zip(&b).map(|(x, y)| x + y * 0.7).collect();
        assert!(dist(&h.project_ac(&mix).unwrap(), &w) < 1e-8);

        let free = ham(PotentialSpec::zero(), 20.0, 200);
        let u: Vec<Complex64> = (0..200).map(|i| Complex64::new((i as f64).sin(), 1.0)).collect();
        assert_eq!(free.project_ac(&u).unwrap(), u);
    }

    fn sample_state(h: &DiscreteHamiltonian) -> Vec<Complex64> {
        h.grid()
            .points()
            .iter()
            .map(|&x| Complex64::from_polar((-(x - 1.0) * (x - 1.0)).exp(), 0.8 * x))
            .collect()
    }

    #[test]
    fn propagation_is_a_unitary_group() {
        let h = ham(PotentialSpec::sech_squared(-2.0, 1.0), 20.0, 512);
        let u = sample_state(&h);
        assert!(dist(&h.propagate(0.0, &u).unwrap(), &u) < 1e-12 * norm(&u).max(1.0) * 10.0);
        let a = h.propagate(0.3, &u).unwrap();
        assert!((norm(&a) - norm(&u)).abs() < 1e-10 * norm(&u));
        let ab = h.propagate(0.5, &a).unwrap();
        let direct = h.propagate(0.8, &u).unwrap();
        assert!(dist(&ab, &direct) < 1e-9 * norm(&u));
        let l = h.project_ac(&h.propagate(0.7, &u).unwrap()).unwrap();
        let r = h.propagate(0.7, &h.project_ac(&u).unwrap()).unwrap();
        assert!(dist(&l, &r) < 1e-9 * norm(&u));
    }

    #[test]
    fn free_gaussian_spreads_as_predicted() {
        let h = ham(PotentialSpec::zero(), 40.0, 4096);
        let tau = 2.0;
        let u0: Vec<Complex64> = h
            .grid()
            .points()
            .iter()
            .map(|&x| Complex64::new((-x * x / 2.0).exp(), 0.0))
            .collect();
        let got = h.propagate(tau, &u0).unwrap();
        let a = Complex64::new(1.0, 2.0 * tau);
        let want: Vec<Complex64> = h
            .grid()
            .points()
            .iter()
            .map(|&x| (-(x * x) / (2.0 * a)).exp() / a.sqrt())
            .collect();
        assert!(dist(&got, &want) / norm(&want) < 1e-3);
    }

    #[test]
    fn batched_propagation_matches_single() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 20.0, 512);
        let u = sample_state(&h);
        let basis = h.active_basis(&u, 0.0).unwrap();
        let many = basis.propagate_many(&[0.0, 0.4, 1.1]).unwrap();
        assert!(dist(&many[0], &u) < 1e-10 * norm(&u));
        assert!(dist(&many[2], &h.propagate(1.1, &u).unwrap()) < 1e-10 * norm(&u));
        let trimmed = h.active_basis(&u, 1e-14).unwrap();
        assert!(trimmed.len() <= basis.len());
        let t = trimmed.propagate_many(&[0.4]).unwrap();
        assert!(dist(&t[0], &many[1]) < 1e-10 * norm(&u));
    }

    #[test]
    fn free_kernel_values() {
        let k = free_resolvent_kernel(1.0, Branch::Plus, 0.3, 0.3).unwrap();
        assert!((k - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let k = free_resolvent_kernel(4.0, Branch::Plus, 0.0, 0.0).unwrap();
        assert!((k - Complex64::new(0.0, 0.25)).norm() < 1e-15);
        let k = free_resolvent_kernel(1.0, Branch::Plus, PI, 0.0).unwrap();
        assert!((k - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        let m = free_resolvent_kernel(1.0, Branch::Minus, 0.0, 0.0).unwrap();
        assert!((m - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!(free_resolvent_kernel(0.0, Branch::Plus, 0.0, 0.0).is_err());
    }

    fn bump(grid: &Grid) -> Vec<Complex64> {
        grid.points()
            .iter()
            .map(|&x| Complex64::new((-4.0 * x * x).exp(), 0.0))
            .collect()
    }

    #[test]
    fn born_series_for_zero_potential_is_free_resolvent() {
        let g = Grid::new(8.0, 801).unwrap();
        let v = sample_potential(&PotentialSpec::zero(), &g).unwrap();
        let f = bump(&g);
        let s = born_series_apply(&v, 2.0, Branch::Plus, &f, 5).unwrap();
        let s0 = born_series_apply(&v, 2.0, Branch::Plus, &f, 0).unwrap();
        assert_eq!(s.partial_sum, s0.partial_sum);
        assert!(s.term_sup_norms[1..].iter().all(|&t| t == 0.0));
    }

    #[test]
    fn born_series_refuses_low_energy() {
        let g = Grid::new(8.0, 401).unwrap();
        let spec = PotentialSpec::gaussian(3.0, 1.0);
        let v = sample_potential(&spec, &g).unwrap();
        let l0 = lambda0(&spec).unwrap();
        assert!(matches!(
            born_series_apply(&v, l0, Branch::Plus, &bump(&g), 3),
            Err(LabError::ConvergenceRegion(_))
        ));
    }

    #[test]
    fn born_series_converges_to_limiting_absorption() {
        let spec = PotentialSpec::gaussian(3.0, 1.0);
        let g = Grid::new(8.0, 3201).unwrap();
        let v = sample_potential(&spec, &g).unwrap();
        let energy = 4.0 * lambda0(&spec).unwrap();
        let f = bump(&g);
        let s = born_series_apply(&v, energy, Branch::Plus, &f, 20).unwrap();
        let bound = born_ratio_bound(&v, energy).unwrap();
        assert!((bound - 0.25).abs() < 1e-9);
        for r in s.ratios() {
            assert!(r <= 1.1 * bound, "ratio {r}");
        }
        let (oracle, eps) = LargeBoxResolvent::for_energy(&spec, energy).unwrap();
        let col = oracle
            .boundary_apply(energy, eps, true, |x| Complex64::new((-4.0 * x * x).exp(), 0.0))
            .unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &x) in g.points().iter().enumerate() {
            if x.abs() <= 4.0 {
                let w = col.at(x).unwrap();
                num += (s.partial_sum[i] - w).norm_sqr();
                den += w.norm_sqr();
            }
        }
        assert!((num / den).sqrt() < 1e-2, "rel err {}", (num / den).sqrt());
    }

    fn lorentzian_density(h: &DiscreteHamiltonian, f: &[Complex64], l: f64, eps: f64) -> f64 {
        let c = h.eigen_coefficients(f).unwrap();
        c.iter()
            .zip(h.eigenvalues())
            .map(|(ck, ev)| ck.norm_sqr() * eps / PI / ((l - ev).powi(2) + eps * eps))
            .sum()
    }

    #[test]
    fn stone_density_point_masses() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 20.0, 400);
        let k = 30;
        let lam = h.eigenvalues()[k];
        let gap = h.eigenvalue_spacing(k);
        let eps = gap / 10.0;
        let f = cvec(&h.eigenvector(k));
        let mode = DensityMode::Vector(f.clone());
        let inside = stone_spectral_density(&h, lam - 10.0 * gap, lam + 10.0 * gap, eps, 4001, &mode).unwrap();
        assert!(inside.warnings.is_empty());
        assert!((inside.integral() - 1.0).abs() < 1e-2);
        assert!(inside.density.iter().all(|&d| d >= -1e-10));
        let edge = stone_spectral_density(&h, lam, lam + 10.0 * gap, eps, 4001, &mode).unwrap();
        assert!((edge.integral() - 0.5).abs() < 2e-2);

        for (&l, &d) in inside.lambda_grid.iter().zip(&inside.density).step_by(97) {
            let want = lorentzian_density(&h, &f, l, eps);
            assert!((d - want).abs() < 1e-6 * want.max(1e-3), "{d} vs {want}");
        }
    }

    #[test]
    fn stone_total_mass_and_additivity() {
        let h = ham(PotentialSpec::gaussian(3.0, 1.0), 10.0, 100);
        let f: Vec<Complex64> = (0..100)
            .map(|i| Complex64::new(((i * 37 % 11) as f64) - 5.0, (i % 3) as f64))
            .collect();
        let nf = norm(&f);
        let f: Vec<Complex64> = f.iter().map(|z| z / nf).collect();
        let ev = h.eigenvalues();
        let eps = 0.05;
        let (a, b) = (ev[0] - 2000.0 * eps, ev[99] + 2000.0 * eps);
        let mode = DensityMode::Vector(f.clone());
        let tr = stone_spectral_density(&h, a, b, eps, 400_001, &mode).unwrap();
        assert!((tr.integral() - 1.0).abs() < 1e-2);

        let mid = 0.5 * (ev[40] + ev[41]);
        let n = 20_001;
        let left = stone_spectral_density(&h, ev[30], mid, eps, n, &mode).unwrap();
        let right = stone_spectral_density(&h, mid, ev[50], eps, n, &mode).unwrap();
        let whole = stone_spectral_density(&h, ev[30], ev[50], eps, 2 * n - 1, &mode).unwrap();
        assert!((left.integral() + right.integral() - whole.integral()).abs() < 1e-6);

        let t = stone_spectral_density(&h, a, b, eps, 400_001, &DensityMode::Trace).unwrap();
        assert!((t.integral() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn coarse_lambda_grid_warns() {
        let h = ham(PotentialSpec::zero(), 10.0, 64);
        let f = cvec(&h.eigenvector(3));
        let est = stone_spectral_density(&h, 0.0, 10.0, 0.01, 11, &DensityMode::Vector(f)).unwrap();
        assert_eq!(est.warnings.len(), 1);
    }
}
