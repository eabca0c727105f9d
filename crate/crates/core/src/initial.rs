//! Initial data for the propagation experiments.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::estimates::norms::lp_norm_weighted;
use crate::spectral::DiscreteHamiltonian;
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    L1,
    #[default]
    L2,
    None,
}

/// `u0`, built on the grid of a Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `exp(−(x−c)²/(2σ²) + ikx)`.
    Gaussian {
        #[serde(default)]
        center: f64,
        width: f64,
        #[serde(default)]
        momentum: f64,
        #[serde(default)]
        normalization: Normalization,
    },
    /// The `index`-th eigenvector (ascending energy).
    Eigenstate { index: usize },
    /// A Gaussian restricted to eigenmodes with energy at most `energy_max`.
    BandLimited {
        #[serde(default)]
        center: f64,
        width: f64,
        energy_max: f64,
        #[serde(default)]
        normalization: Normalization,
    },
}

impl InitialState {
    pub fn gaussian(width: f64, normalization: Normalization) -> Self {
        InitialState::Gaussian {
            center: 0.0,
            width,
            momentum: 0.0,
            normalization,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let width = match self {
            InitialState::Gaussian { width, .. } | InitialState::BandLimited { width, .. } => *width,
            InitialState::Eigenstate { .. } => return Ok(()),
        };
        if !(width > 0.0 && width.is_finite()) {
            return Err(LabError::Validation(format!("initial width must be positive, got {width}")));
        }
        Ok(())
    }

    pub fn build(&self, h: &DiscreteHamiltonian) -> Result<Vec<Complex64>> {
        self.validate()?;
        let grid = h.grid();
        let dx = grid.spacing();
        let gaussian = |center: f64, width: f64, momentum: f64| -> Vec<Complex64> {
            grid.points()
                .iter()
                .map(|&x| {
                    let y = (x - center) / width;
                    Complex64::from_polar((-0.5 * y * y).exp(), momentum * x)
                })
                .collect()
        };
        let (u, normalization) = match *self {
            InitialState::Gaussian {
                center,
                width,
                momentum,
                normalization,
            } => (gaussian(center, width, momentum), normalization),
            InitialState::Eigenstate { index } => {
                if index >= h.dim() {
                    return Err(LabError::Validation(format!(
                        "eigenstate index {index} out of range (dimension {})",
                        h.dim()
                    )));
                }
                let v = h.eigenvector(index);
                let scale = 1.0 / dx.sqrt();
                (v.iter().map(|&x| Complex64::new(x * scale, 0.0)).collect(), Normalization::None)
            }
            InitialState::BandLimited {
                center,
                width,
                energy_max,
                normalization,
            } => {
                let mut c = h.eigen_coefficients(&gaussian(center, width, 0.0))?;
                for (ck, lam) in c.iter_mut().zip(h.eigenvalues()) {
                    if *lam > energy_max {
                        *ck = Complex64::new(0.0, 0.0);
                    }
                }
                if c.iter().all(|z| z.norm() == 0.0) {
                    return Err(LabError::Validation(format!(
                        "no eigenmode has energy ≤ {energy_max}"
                    )));
                }
                (h.synthesize(&c)?, normalization)
            }
        };
        Ok(normalize(u, normalization, dx))
    }
}

fn normalize(mut u: Vec<Complex64>, how: Normalization, dx: f64) -> Vec<Complex64> {
    let n = match how {
        Normalization::L1 => lp_norm_weighted(&u, 1.0, dx),
        Normalization::L2 => lp_norm_weighted(&u, 2.0, dx),
        Normalization::None => return u,
    };
    if n > 0.0 {
        for z in u.iter_mut() {
            *z /= n;
        }
    }
    u
}
