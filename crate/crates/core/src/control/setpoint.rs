use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::cop::RobotCop;

/// Minimum window length for a setpoint capture (one second at 50 ms).
pub const MIN_SETPOINT_SAMPLES: usize = 20;

/// Roll (X) and pitch (Y) CoP setpoints in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Setpoints {
    pub x: f64,
    pub y: f64,
}

impl Setpoints {
    pub fn new(x: f64, y: f64) -> Result<Self, ControlError> {
        if !(x.is_finite() && y.is_finite() && x.abs() <= 2.0 && y.abs() <= 1.0) {
            return Err(ControlError::SetpointOutOfRange { x, y });
        }
        Ok(Self { x, y })
    }
}

/// Mean CoP over a window of fresh samples.
pub fn capture_setpoint(window: &[RobotCop]) -> Result<Setpoints, ControlError> {
    if window.len() < MIN_SETPOINT_SAMPLES {
        return Err(ControlError::InsufficientData {
            needed: MIN_SETPOINT_SAMPLES,
            got: window.len(),
        });
    }
    let n = window.len() as f64;
    let x = window.iter().map(|c| c.x).sum::<f64>() / n;
    let y = window.iter().map(|c| c.y).sum::<f64>() / n;
    Setpoints::new(x, y)
}
