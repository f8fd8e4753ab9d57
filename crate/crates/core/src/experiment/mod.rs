//! Trials, gain sweeps and their reports.
//!
//! Batch runs and the live service drive the same [`Engine`]; a trial is just
//! the engine stepped through a motion script until it ends or the robot falls.

mod config;
mod engine;
mod report;
mod rms;
mod sweep;
mod trial;

pub use config::{LiftSide, ScriptKind, TrialConfig};
pub use engine::{
    Engine, EngineConfig, PhaseSetpoints, TickSnapshot, Transport, CONTROL_PERIOD_MS,
    FOOT_SAMPLE_PHASE_MS,
};
pub use report::{
    read_report_csv, read_trial_csv, report_markdown, write_report_csv, write_report_markdown,
    write_trial_csv,
};
pub use rms::rms_error;
pub use sweep::{bringup_grid, kd_grid, ki_grid, kp_grid, run_sweep, SweepReport, SweepRow};
pub use trial::{capture_reference_setpoints, run_trial, Outcome, TrialRecord, TrialRow};

use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::plant::MotionError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("series is empty")]
    EmptySeries,
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
