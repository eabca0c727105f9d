//! Mixed norms, exponent fits and the Monte Carlo experiments for the
//! dispersive, Strichartz and Brownian convolution bounds.

pub mod convolution;
pub mod dispersive;
pub mod fit;
pub mod norms;
pub mod sde;
pub mod strichartz;

use serde::Serialize;

use crate::grid::PotentialFamily;
use crate::scattering::{detect_resonance, DEFAULT_RESONANCE_TOL};
use crate::spectral::DiscreteHamiltonian;
use crate::Result;

pub use convolution::{convolution_lemma_experiment, ConvolutionOutcome, ConvolutionSetup};
pub use dispersive::{
    abs_normal_moment, abscissa_only_decay, dispersive_experiment, expectation_decay_experiment,
    CensorRule, DispersiveOutcome, ExpectationOutcome,
};
pub use fit::{fit_decay_exponent, fit_decay_exponent_with, EstimateReport, FitOptions};
pub use norms::{
    admissible_pair, conjugate, lp_norm_x, mixed_norm, mu_homogeneous, mu_inhomogeneous, MixedNormSpec,
};
pub use sde::{sde_convergence_experiment, SdeOutcome, SdeSetup};
pub use strichartz::{
    strichartz_homogeneous_experiment, strichartz_inhomogeneous_experiment, Forcing, StrichartzOutcome,
    StrichartzSetup,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// A hypothesis of the bound being tested fails for this input.
    Hypothesis,
    /// The numerics may be unreliable.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub message: String,
}

impl Warning {
    pub fn hypothesis(message: impl Into<String>) -> Self {
        Self {
            kind: WarningKind::Hypothesis,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: WarningKind::Numerical,
            message: message.into(),
        }
    }
}

/// Flags a zero-energy resonance. The free Laplacian is exempt: its kernel
/// is explicit and decays at the same rate.
pub fn resonance_warning(h: &DiscreteHamiltonian) -> Result<Option<Warning>> {
    let v = h.potential();
    if v.spec().family == PotentialFamily::Zero || v.max_abs() == 0.0 {
        return Ok(None);
    }
    Ok(detect_resonance(v, DEFAULT_RESONANCE_TOL)?
        .then(|| Warning::hypothesis("zero-energy resonance detected")))
}
