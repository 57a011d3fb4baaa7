//! Config-driven runs of the waveguide single-photon scenarios.
//!
//! A run parses a [`config::ScenarioConfig`], evaluates the scenario, writes
//! CSV tables, a JSON summary and a hash manifest, and returns a
//! [`RunReport`].

pub mod config;
pub mod output;
pub mod scenario;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use config::{parse_config, ConfigError, OutputFormat, Scenario, ScenarioConfig};
pub use output::ManifestEntry;
pub use scenario::{run_scenario, Convergence, Outcome};
pub use sweep::{sweep, SweepCell};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{scenario}: {source}")]
    Numerical { scenario: Scenario, source: wqed_core::Error },
    #[error("{scenario}: half-resolution change {change:.3e} exceeds tolerance {tolerance:.1e}")]
    NotConverged { scenario: Scenario, change: f64, tolerance: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for bad input, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use wqed_core::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { source: E::Domain(_) | E::InvalidGrid(_) | E::GridMismatch(_) | E::Aliasing { .. }, .. } => 2,
            RunError::Numerical { .. } | RunError::NotConverged { .. } => 3,
            RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub parameters: BTreeMap<String, Value>,
    pub scalars: BTreeMap<String, f64>,
    pub manifest: Vec<ManifestEntry>,
    pub wall_clock_s: f64,
    pub convergence: Option<Convergence>,
}

impl RunReport {
    /// False only when a half-resolution check ran and failed.
    pub fn converged(&self) -> bool {
        self.convergence.as_ref().is_none_or(|c| c.converged)
    }
}

/// Evaluate `cfg` and write its outputs into `out_dir`.
pub fn execute(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, RunError> {
    let clock = Instant::now();
    let outcome = run_scenario(cfg).map_err(|source| RunError::Numerical { scenario: cfg.scenario, source })?;
    let format = cfg.output.format;
    let manifest = output::write_outputs(out_dir, &outcome, format.csv(), format.json())?;
    Ok(RunReport {
        scenario: outcome.scenario,
        parameters: outcome.parameters,
        scalars: outcome.scalars,
        manifest,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        convergence: outcome.convergence,
    })
}
