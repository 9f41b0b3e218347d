//! Batch front end for the verification library: configuration, suites,
//! reports and CSV export behind the `noether-lab` binary.

pub mod config;
pub mod registry;
pub mod report;
pub mod suites;

use std::path::Path;

use noether_core::{Trajectory, WaveState};

use crate::config::{RunConfig, Suite};
use crate::registry::Model;
use crate::report::{write_text, IoError, Record, Report};
use crate::suites::{run_suite, Ctx};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("model: {0}")]
    Model(#[from] noether_core::Error),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Model(_) => EXIT_CONFIG,
            RunError::Io(_) => EXIT_IO,
        }
    }
}

pub struct RunOutput {
    pub report: Report,
    pub artifacts: Vec<(String, String)>,
}

/// Runs the configured suites in order. Deterministic given the configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    run_suites(cfg, &cfg.suites)
}

pub fn run_suites(cfg: &RunConfig, suites: &[Suite]) -> Result<RunOutput, RunError> {
    let model = Model::build(&cfg.model)?;
    let ctx = Ctx::new(cfg, &model);
    let mut records: Vec<Record> = Vec::new();
    let mut artifacts = Vec::new();
    for suite in suites {
        let (r, a) = run_suite(*suite, &ctx);
        records.extend(r);
        artifacts.extend(a);
    }
    Ok(RunOutput { report: Report::new(cfg.clone(), records), artifacts })
}

/// Writes the report, NDJSON records and artifacts under `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), IoError> {
    out.report.write(dir)?;
    for (name, text) in &out.artifacts {
        write_text(&dir.join(name), text)?;
    }
    Ok(())
}

pub fn emit_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<(), IoError> {
    write_text(path, &traj.to_csv())
}

pub fn emit_wave_csv(state: &WaveState, path: &Path) -> Result<(), IoError> {
    write_text(path, &state.to_csv())
}
