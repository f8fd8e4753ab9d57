//! Roll/pitch PID over CoP error and the torso/hip/ankle compensation.

mod controller;
mod joints;
mod pid;
mod setpoint;

pub use controller::{BalanceController, ControlInput, ControlOutput, ControllerConfig};
pub use joints::{
    distribute_correction, CompensationFactors, Distribution, JointAngles, JointCorrection,
    JointLimits, JOINT_NAMES,
};
pub use pid::{pid_step, PidConfig, PidGains, PidState};
pub use setpoint::{capture_setpoint, Setpoints, MIN_SETPOINT_SAMPLES};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("gains must be finite and non-negative: kp={kp} ki={ki} kd={kd}")]
    InvalidGains { kp: f64, ki: f64, kd: f64 },
    #[error("setpoint capture needs at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("setpoint ({x}, {y}) outside the robot frame")]
    SetpointOutOfRange { x: f64, y: f64 },
}
