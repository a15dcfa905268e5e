//! Scenario runner for the lane-level vehicle locator: file formats,
//! truth paths, the simulated pipeline and its reports.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod network_file;
pub mod report;
pub mod scenario;
pub mod seed;
pub mod sim;
pub mod truth;

use std::path::Path;

pub use report::{emit_outputs, Aggregates, EpochRow, EpochStatus, RunReport};
pub use scenario::{load_scenario, prepare, validate_scenario, Diagnostic, Prepared, Scenario, ScenarioError, ScenarioFile, Severity};
pub use sim::{run_scenario, RunError};

/// Command-line adjustments applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_dgps: bool,
}

impl Overrides {
    pub fn apply(&self, file: &mut ScenarioFile) {
        if let Some(seed) = self.seed {
            file.scenario.seed = seed;
        }
        if self.no_dgps {
            file.scenario.dgps.enabled = false;
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AvlError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Loads, checks and prepares a scenario file.
pub fn load_prepared(path: &Path, overrides: Overrides) -> Result<Prepared, ScenarioError> {
    let mut file = load_scenario(path)?;
    overrides.apply(&mut file);
    prepare(&file).map_err(ScenarioError::Invalid)
}
