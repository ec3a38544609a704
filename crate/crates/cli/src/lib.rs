//! Declarative scenario runner on top of the `bvylab` estimators.
//!
//! A run is one JSON [`ExperimentConfig`]; it produces `report.json`, curve
//! CSVs with SVG plots, and a `timing.log`. See `configs/` for examples and
//! the README for the schema.

pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Scenario};
pub use error::CliError;
pub use plot::{emit_plot, PlotData};
pub use report::{Assertion, Report, Verdict};
pub use runner::{run_scenario, run_with_workers, workers_from_env};

use bvylab::lipcalc::FormulaId;
use bvylab::space::{SpaceInstance, SpaceKind, Window};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SpaceEntry {
    pub kind: SpaceKind,
    pub dimensions: &'static str,
    pub tangent_structure: bool,
    pub ball_sampling: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionEntry {
    pub formula_id: &'static str,
    pub analytic_gradient: bool,
    pub spaces: Vec<SpaceKind>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Catalogue {
    pub scenarios: Vec<Scenario>,
    pub spaces: Vec<SpaceEntry>,
    pub functions: Vec<FunctionEntry>,
}

/// What can be run on what.
pub fn catalogue() -> Catalogue {
    let samples = [
        (SpaceInstance::euclidean(Window::unit(2)), "1-4"),
        (
            SpaceInstance::weighted(Window::unit(2), bvylab::space::Weight::DEFAULT),
            "1-4",
        ),
        (SpaceInstance::banach(Window::unit(2), 1.0), "1-4"),
        (
            SpaceInstance::heisenberg(Window::centered(&[1.0, 1.0, 1.0])),
            "3 (homogeneous 4)",
        ),
        (SpaceInstance::fat_cantor(Window::unit(1), &[0.25]), "1"),
    ];
    let spaces: Vec<SpaceEntry> = samples
        .into_iter()
        .map(|(s, dims)| {
            let s = s.expect("catalogue spaces are valid");
            SpaceEntry {
                kind: s.kind(),
                dimensions: dims,
                tangent_structure: s.has_tangent_structure(),
                ball_sampling: s.supports_ball_sampling(),
            }
        })
        .collect();
    let functions = FormulaId::ALL
        .iter()
        .map(|f| FunctionEntry {
            formula_id: f.name(),
            analytic_gradient: f.is_smooth(),
            spaces: spaces
                .iter()
                .map(|s| s.kind)
                .filter(|k| f.supports(*k))
                .collect(),
        })
        .collect();
    Catalogue {
        scenarios: Scenario::ALL.to_vec(),
        spaces,
        functions,
    }
}
