use serde::{Deserialize, Serialize};

use super::ControlError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self, ControlError> {
        let ok = |g: f64| g.is_finite() && g >= 0.0;
        if ok(kp) && ok(ki) && ok(kd) {
            Ok(Self { kp, ki, kd })
        } else {
            Err(ControlError::InvalidGains { kp, ki, kd })
        }
    }

    pub fn p(kp: f64) -> Self {
        Self {
            kp,
            ki: 0.0,
            kd: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kp == 0.0 && self.ki == 0.0 && self.kd == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidConfig {
    /// Symmetric bound on the accumulated error integral.
    pub integral_limit: f64,
    /// Zero derivative on the first step after a reset.
    pub suppress_first_derivative: bool,
}

impl Default for PidConfig {
    fn default() -> Self {
        Self {
            integral_limit: 10.0,
            suppress_first_derivative: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One discrete PID update.
///
/// `e = setpoint - input`, rectangular integration with clamping and a
/// backward-difference derivative.
pub fn pid_step(
    state: &PidState,
    gains: &PidGains,
    config: &PidConfig,
    setpoint: f64,
    input: f64,
    dt: f64,
) -> (f64, PidState) {
    debug_assert!(dt > 0.0, "dt must be positive");
    let error = setpoint - input;
    let limit = config.integral_limit.abs();
    let integral = (state.integral + error * dt).clamp(-limit, limit);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else if config.suppress_first_derivative {
        0.0
    } else {
        error / dt
    };
    let output = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        output,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    )
}
