//! Scenario files: TOML, strict keys, every section optional.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bifurcate::{BranchKind, ContinuationSettings};
use crate::birthop::{BirthProfile, Species};
use crate::error::Error;
use crate::mesh::Grids;
use crate::model::{Model, ModelParams};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub age: AgeConfig,
    pub params: ModelParams,
    pub profiles: ProfilesConfig,
    pub run: RunConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_interior: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_interior: 64,
            length: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgeConfig {
    pub a_max: f64,
    pub steps: usize,
}

impl Default for AgeConfig {
    fn default() -> Self {
        AgeConfig { a_max: 1.0, steps: 128 }
    }
}

/// Raw birth profile before normalization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    #[default]
    Constant,
    ExpDecay {
        rate: f64,
    },
    /// One value per age node, `steps + 1` in total.
    Table {
        values: Vec<f64>,
    },
}

impl ProfileSpec {
    pub fn samples(&self, ages: &[f64]) -> Result<Vec<f64>, String> {
        match self {
            ProfileSpec::Constant => Ok(vec![1.0; ages.len()]),
            ProfileSpec::ExpDecay { rate } => {
                if !rate.is_finite() || *rate < 0.0 {
                    return Err(format!("exp_decay rate must be finite and >= 0, got {rate}"));
                }
                Ok(ages.iter().map(|a| (-rate * a).exp()).collect())
            }
            ProfileSpec::Table { values } => {
                if values.len() != ages.len() {
                    return Err(format!(
                        "table profile has {} values but the age grid has {} nodes",
                        values.len(),
                        ages.len()
                    ));
                }
                Ok(values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesConfig {
    pub prey: ProfileSpec,
    pub predator: ProfileSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Eigen,
    Semitrivial,
    Bifpoints,
    Continue,
    Diagram,
    Verify,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Eigen => "eigen",
            Mode::Semitrivial => "semitrivial",
            Mode::Bifpoints => "bifpoints",
            Mode::Continue => "continue",
            Mode::Diagram => "diagram",
            Mode::Verify => "verify",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `|η r(H[α₁u_η]) - 1|` for converged semi-trivial states.
    pub spectral_identity: f64,
    /// Relative slack of the semi-trivial envelopes.
    pub envelope: f64,
    /// Absolute floor of the finite-difference derivative check.
    pub derivative_fd: f64,
    /// Re-validated residual of stored branch points.
    pub branch_residual: f64,
    /// Slack of the coexistence ordering and parameter constraints.
    pub constraint: f64,
    /// `|ξ̂ - ξ₁|` at a branch join.
    pub join: f64,
    /// Relative distance of the terminal predator trace to `v_ξ̂`.
    pub join_trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            spectral_identity: 1e-6,
            envelope: 0.05,
            derivative_fd: 1e-4,
            branch_residual: 1e-8,
            constraint: 1e-6,
            join: 1e-2,
            join_trace: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, must agree with the subcommand.
    pub mode: Option<Mode>,
    /// Fixed `η` values: `ξ₀`, `ξ₁` and `B3` branches.
    pub eta_values: Vec<f64>,
    /// Fixed `ξ` values: `η₀` and `S3` above 1, `η₁` and `S4` below 1.
    pub xi_values: Vec<f64>,
    /// Intensities sampled along both semi-trivial branches.
    pub semitrivial_values: Vec<f64>,
    pub eta_max: f64,
    pub xi_max: f64,
    /// Trend samples for the `N`/`δ` estimates; 0 skips them.
    pub limit_samples: usize,
    pub branches: Vec<BranchKind>,
    pub continuation: ContinuationSettings,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            eta_values: vec![1.2, 1.5, 2.0, 3.0],
            xi_values: vec![1.2, 1.5, 2.0, 3.0],
            semitrivial_values: vec![0.5, 0.9, 1.0, 1.2, 1.5, 2.0, 3.0, 5.0],
            eta_max: 10.0,
            xi_max: 10.0,
            limit_samples: 6,
            branches: vec![BranchKind::B3, BranchKind::S3],
            continuation: ContinuationSettings::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Also write semi-trivial fields as age-by-space CSV matrices.
    pub fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
            fields: false,
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeControl {
    #[default]
    None,
    /// Predator profile scaled by 1.01 after normalization.
    MisnormalizedPredator,
}

/// Scale applied to the predator profile by the negative control.
pub const MISNORMALIZATION: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub negative_control: NegativeControl,
    /// Randomized trials per property check.
    pub trials: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            negative_control: NegativeControl::None,
            trials: 100,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the scalar invariants, then builds the model once to catch
    /// grid and profile problems.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: String| Err(HarnessError::Validation(m));
        let run = &self.run;
        for (name, values) in [
            ("run.eta_values", &run.eta_values),
            ("run.xi_values", &run.xi_values),
            ("run.semitrivial_values", &run.semitrivial_values),
        ] {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(run.eta_max > 1.0 && run.eta_max.is_finite()) {
            return invalid(format!("run.eta_max must exceed 1, got {}", run.eta_max));
        }
        if !(run.xi_max > 1.0 && run.xi_max.is_finite()) {
            return invalid(format!("run.xi_max must exceed 1, got {}", run.xi_max));
        }
        run.continuation
            .validate()
            .or_else(|e| invalid(format!("run.continuation: {e}")))?;
        let t = &run.tolerances;
        for (name, v) in [
            ("spectral_identity", t.spectral_identity),
            ("envelope", t.envelope),
            ("derivative_fd", t.derivative_fd),
            ("branch_residual", t.branch_residual),
            ("constraint", t.constraint),
            ("join", t.join),
            ("join_trace", t.join_trace),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("run.tolerances.{name} must be positive, got {v}"));
            }
        }
        if self.verify.trials == 0 {
            return invalid("verify.trials must be at least 1".into());
        }
        self.build_model().map(|_| ())
    }

    pub fn build_grids(&self) -> Result<Grids, HarnessError> {
        Grids::new(self.grid.n_interior, self.grid.length, self.age.a_max, self.age.steps).map_err(validation)
    }

    pub fn build_model(&self) -> Result<Model, HarnessError> {
        let grids = self.build_grids()?;
        let ages = grids.age.ages();
        let prey = self
            .profiles
            .prey
            .samples(&ages)
            .map_err(|m| HarnessError::Validation(format!("profiles.prey: {m}")))?;
        let predator = self
            .profiles
            .predator
            .samples(&ages)
            .map_err(|m| HarnessError::Validation(format!("profiles.predator: {m}")))?;
        Model::new(grids, self.params, &prey, &predator).map_err(validation)
    }

    /// The model with the configured negative control applied.
    pub fn build_verify_model(&self) -> Result<Model, HarnessError> {
        let mut model = self.build_model()?;
        if self.verify.negative_control == NegativeControl::MisnormalizedPredator {
            let p = &model.predator;
            model.predator = BirthProfile::with_scale(Species::Predator, p.samples(), MISNORMALIZATION, &model.grids)
                .map_err(validation)?;
        }
        Ok(model)
    }
}

fn validation(e: Error) -> HarnessError {
    HarnessError::Validation(e.to_string())
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::ReadConfig {
        path: path.to_path_buf(),
        source: e,
    })?;
    ScenarioConfig::from_toml(&text).map_err(|e| match e {
        HarnessError::Parse(m) => HarnessError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
