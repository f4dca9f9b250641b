use serde::{Deserialize, Serialize};

use crate::birthop::{normalize_profile, BirthProfile, Species};
use crate::error::{Error, Result};
use crate::mesh::Grids;

/// Mortality and interaction coefficients. The prey equation carries
/// `α₁u + α₂v`, the predator equation `β₁v - β₂u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            alpha1: 1.0,
            alpha2: 1.0,
            beta1: 1.0,
            beta2: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Discretization, coefficients and both normalized birth profiles.
#[derive(Debug, Clone)]
pub struct Model {
    pub grids: Grids,
    pub params: ModelParams,
    pub prey: BirthProfile,
    pub predator: BirthProfile,
}

impl Model {
    pub fn new(grids: Grids, params: ModelParams, prey_raw: &[f64], predator_raw: &[f64]) -> Result<Self> {
        params.validate()?;
        let prey = normalize_profile(Species::Prey, prey_raw, &grids)?;
        let predator = normalize_profile(Species::Predator, predator_raw, &grids)?;
        Ok(Model {
            grids,
            params,
            prey,
            predator,
        })
    }

    /// Constant raw profiles on `[0,1] x [0,1]`.
    pub fn uniform(n: usize, steps: usize, params: ModelParams) -> Result<Self> {
        let grids = Grids::new(n, 1.0, 1.0, steps)?;
        let raw = vec![1.0; grids.rows()];
        Model::new(grids, params, &raw, &raw)
    }

    pub fn profile(&self, species: Species) -> &BirthProfile {
        match species {
            Species::Prey => &self.prey,
            Species::Predator => &self.predator,
        }
    }

    /// Self-limitation coefficient of a species in isolation.
    pub fn self_limitation(&self, species: Species) -> f64 {
        match species {
            Species::Prey => self.params.alpha1,
            Species::Predator => self.params.beta1,
        }
    }
}
