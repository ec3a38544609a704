//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use bvylab::estimator::{BVYConfig, KNormConfig};
use bvylab::lipcalc::{FormulaId, TestFunction};
use bvylab::space::{SpaceDescriptor, SpaceInstance, SpaceKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    VerifyBvyEuclidean,
    VerifyBounds,
    VerifyOptimality,
    VerifyAsymptotic,
    DiagnoseSpace,
    #[serde(rename = "golden-1d")]
    Golden1d,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::VerifyBvyEuclidean,
        Scenario::VerifyBounds,
        Scenario::VerifyOptimality,
        Scenario::VerifyAsymptotic,
        Scenario::DiagnoseSpace,
        Scenario::Golden1d,
    ];

    fn needs_function(self) -> bool {
        !matches!(self, Scenario::DiagnoseSpace | Scenario::Golden1d)
    }
}

/// Pass/fail thresholds. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Relative tolerance on the fitted limit.
    pub tolerance: f64,
    /// `N_bar` values of the optimality scenario.
    pub n_bar_values: Vec<f64>,
    /// Absolute tolerance on fitted slopes.
    pub slope_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_k_norm: Option<f64>,
    pub k_norm_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_dimension: Option<f64>,
    pub dimension_tolerance: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            tolerance: 0.05,
            n_bar_values: Vec::new(),
            slope_tolerance: 0.1,
            expected_k_norm: None,
            k_norm_tolerance: 0.02,
            expected_dimension: None,
            dimension_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub n_points: usize,
    pub density_points: usize,
    /// Empty means the space's default ladder.
    pub radii: Vec<f64>,
    pub n_trials: usize,
    pub include_boundary: bool,
    pub mass_samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            n_points: 2000,
            density_points: 500,
            radii: Vec::new(),
            n_trials: 10_000,
            include_boundary: false,
            mass_samples: 8192,
        }
    }
}

fn default_n_grad() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Not echoed into the report, so reports from different directories
    /// can be compared byte for byte.
    #[serde(default, skip_serializing)]
    pub output_dir: PathBuf,
    pub space: SpaceDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<TestFunction>,
    #[serde(default)]
    pub bvy: BVYConfig,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub k_norm: KNormConfig,
    /// Outer samples of the gradient integrals.
    #[serde(default = "default_n_grad")]
    pub n_grad: usize,
}

/// A config that passed every pre-run capability check.
#[derive(Debug)]
pub struct Prepared {
    pub space: SpaceInstance,
    pub function: Option<TestFunction>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Build the space, bind the function and check that the scenario can
    /// run on this pair, before any sampling happens.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let space = SpaceInstance::from_descriptor(&self.space)?;
        let function = match (&self.function, self.scenario) {
            (Some(f), _) => Some(f.clone()),
            (None, Scenario::Golden1d) => {
                Some(TestFunction::new(FormulaId::Linear, space.window().clone()))
            }
            (None, s) if s.needs_function() => {
                return Err(CliError::Config(format!(
                    "scenario {s:?} needs a \"function\""
                )));
            }
            (None, _) => None,
        };
        if let Some(f) = &function {
            f.bind(&space)?;
        }
        let cfg_err = |m: &str| Err(CliError::Config(m.to_string()));
        let kind = space.kind();
        match self.scenario {
            Scenario::Golden1d => {
                let f = function.as_ref().expect("set above");
                if kind != SpaceKind::EuclideanBox || space.topo_dim() != 1 {
                    return cfg_err("golden-1d runs on a one-dimensional EuclideanBox");
                }
                let covers = f.support_box.contains_box(space.window());
                let untapered = f.params.taper.unwrap_or(0.0) == 0.0;
                if f.formula_id != FormulaId::Linear || !covers || !untapered {
                    return cfg_err("golden-1d needs an untapered linear function supported on the whole window");
                }
            }
            Scenario::VerifyBvyEuclidean => {
                if kind != SpaceKind::EuclideanBox {
                    return cfg_err("verify-bvy-euclidean runs on EuclideanBox only");
                }
                if !function.as_ref().is_some_and(|f| f.formula_id.is_smooth()) {
                    return cfg_err(
                        "verify-bvy-euclidean needs a function with an analytic gradient",
                    );
                }
            }
            Scenario::VerifyAsymptotic => {
                if !space.has_tangent_structure() {
                    return Err(CliError::Core(bvylab::Error::Unsupported {
                        operation: "K_norm",
                        kind,
                    }));
                }
                if !function.as_ref().is_some_and(|f| f.formula_id.is_smooth()) {
                    return cfg_err("verify-asymptotic needs a function with an analytic gradient");
                }
            }
            Scenario::VerifyOptimality => {
                if self.checks.n_bar_values.is_empty() {
                    return cfg_err("verify-optimality needs checks.n_bar_values");
                }
                if self
                    .checks
                    .n_bar_values
                    .iter()
                    .any(|v| v.is_nan() || *v <= 0.0)
                {
                    return cfg_err("N_bar values must be positive");
                }
            }
            Scenario::VerifyBounds | Scenario::DiagnoseSpace => {}
        }
        let d = &self.diagnostics;
        if self.n_grad == 0
            || d.n_points == 0
            || d.density_points == 0
            || d.n_trials == 0
            || d.mass_samples == 0
        {
            return cfg_err("sample budgets must be positive");
        }
        Ok(Prepared { space, function })
    }
}
