//! The JSON report. Each assertion carries both sides and its margin so a
//! verdict can be recomputed from the file alone.

use bvylab::diagnostics::{DoublingReport, VolumeLowerReport};
use bvylab::estimator::{BoundReport, GradNorm, LimitFit, MCEstimate, RescaledCurve};
use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
}

/// `lhs relation rhs`, with `margin = rhs - lhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

impl Assertion {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Assertion {
            name: name.into(),
            lhs,
            relation: Relation::Le,
            rhs,
            margin: rhs - lhs,
            holds: lhs <= rhs,
        }
    }

    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Assertion {
            relation: Relation::Lt,
            holds: lhs < rhs,
            ..Self::le(name, lhs, rhs)
        }
    }

    /// `|estimate - target| <= tol * |target|`.
    pub fn within(name: impl Into<String>, estimate: f64, target: f64, tol: f64) -> Self {
        Self::le(name, (estimate - target).abs(), tol * target.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One `N_bar` of the optimality scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeCase {
    #[serde(rename = "N_bar")]
    pub n_bar: f64,
    pub predicted_slope: f64,
    /// `diverges`, `decays` or `finite`, from the sign of the prediction.
    pub predicted_behaviour: &'static str,
    pub curve_file: String,
    pub curve: RescaledCurve,
    pub fit: LimitFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySummary {
    #[serde(rename = "N")]
    pub n: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub r_ladder: Vec<f64>,
    pub n_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Quantities {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_const: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_norm: Option<GradNorm>,
    #[serde(rename = "K_norm", skip_serializing_if = "Option::is_none")]
    pub k_norm: Option<MCEstimate>,
    /// The value the fitted limit is compared with.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<RescaledCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<LimitFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub slopes: Vec<SlopeCase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doubling: Option<DoublingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_lower: Option<VolumeLowerReport>,
}

/// Sample counts actually spent.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Budgets {
    pub curve_rungs: usize,
    pub pair_samples_per_rung: usize,
    pub grad_samples: usize,
    pub k_norm_outer: usize,
    pub k_norm_shell: usize,
    pub diagnostic_points: usize,
    pub volume_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub quantities: Quantities,
    pub assertions: Vec<Assertion>,
    pub verdict: Verdict,
    pub budgets: Budgets,
    /// Files written next to the report, relative to `output_dir`.
    pub files: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.holds)
    }
}
