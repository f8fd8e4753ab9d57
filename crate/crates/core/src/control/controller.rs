use serde::{Deserialize, Serialize};

use super::{
    distribute_correction, pid_step, CompensationFactors, JointAngles, JointLimits, PidConfig,
    PidGains, PidState, Setpoints,
};
use crate::cop::RobotCop;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Control period in seconds.
    pub dt_s: f64,
    pub pid: PidConfig,
    pub factors: CompensationFactors,
    pub limits: JointLimits,
    /// Route the pitch correction into `pitch_offsets` with the roll factors.
    /// The plant has no sagittal dynamics, so this only shows up in outputs.
    pub pitch_mapping: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            dt_s: 0.05,
            pid: PidConfig::default(),
            factors: CompensationFactors::default(),
            limits: JointLimits::default(),
            pitch_mapping: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub cop: RobotCop,
    /// Both feet reported within the staleness timeout.
    pub fresh: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub theta_e_roll: f64,
    pub theta_e_pitch: f64,
    /// Correction accumulated on top of the motion script, degrees.
    pub offsets: JointAngles,
    pub pitch_offsets: JointAngles,
    pub clamped: bool,
    /// Sensor input was stale; the output is held from the last fresh tick.
    pub frozen: bool,
}

impl ControlOutput {
    fn idle(offsets: JointAngles) -> Self {
        Self {
            theta_e_roll: 0.0,
            theta_e_pitch: 0.0,
            offsets,
            pitch_offsets: JointAngles::default(),
            clamped: false,
            frozen: false,
        }
    }
}

/// Roll and pitch PID loops plus the accumulated joint correction.
///
/// Each fresh tick adds the distributed roll correction to the commanded joint
/// angles. On stale input the previous output is held, no correction is added
/// and both integrators are reset.
#[derive(Debug, Clone)]
pub struct BalanceController {
    gains: PidGains,
    config: ControllerConfig,
    setpoints: Setpoints,
    roll: PidState,
    pitch: PidState,
    offsets: JointAngles,
    pitch_offsets: JointAngles,
    last: Option<ControlOutput>,
    enabled: bool,
}

impl BalanceController {
    pub fn new(gains: PidGains, config: ControllerConfig) -> Self {
        Self {
            gains,
            config,
            setpoints: Setpoints::default(),
            roll: PidState::default(),
            pitch: PidState::default(),
            offsets: JointAngles::default(),
            pitch_offsets: JointAngles::default(),
            last: None,
            enabled: true,
        }
    }

    pub fn gains(&self) -> PidGains {
        self.gains
    }

    pub fn set_gains(&mut self, gains: PidGains) {
        self.gains = gains;
    }

    pub fn setpoints(&self) -> Setpoints {
        self.setpoints
    }

    /// Changes the target and restarts both loops so the step does not kick.
    pub fn set_setpoints(&mut self, setpoints: Setpoints) {
        if setpoints != self.setpoints {
            self.setpoints = setpoints;
            self.reset_loops();
        }
    }

    pub fn set_enabled(&mut self, enabled: bool) {
        self.enabled = enabled;
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn roll_state(&self) -> &PidState {
        &self.roll
    }

    pub fn offsets(&self) -> JointAngles {
        self.offsets
    }

    pub fn reset_loops(&mut self) {
        self.roll = PidState::default();
        self.pitch = PidState::default();
    }

    /// Clears loops and accumulated correction.
    pub fn reset(&mut self) {
        self.reset_loops();
        self.offsets = JointAngles::default();
        self.pitch_offsets = JointAngles::default();
        self.last = None;
    }

    /// One control tick. `script` is the motion-script target for this tick.
    pub fn step(&mut self, input: ControlInput, script: &JointAngles) -> ControlOutput {
        if !self.enabled {
            let out = ControlOutput::idle(self.offsets);
            self.last = Some(out);
            return out;
        }
        if !input.fresh {
            if !self.last.is_some_and(|l| l.frozen) {
                self.reset_loops();
            }
            let mut held = self
                .last
                .unwrap_or_else(|| ControlOutput::idle(self.offsets));
            held.frozen = true;
            self.last = Some(held);
            return held;
        }

        let dt = self.config.dt_s;
        let (theta_roll, roll) = pid_step(
            &self.roll,
            &self.gains,
            &self.config.pid,
            self.setpoints.x,
            input.cop.x,
            dt,
        );
        let (theta_pitch, pitch) = pid_step(
            &self.pitch,
            &self.gains,
            &self.config.pid,
            self.setpoints.y,
            input.cop.y,
            dt,
        );
        self.roll = roll;
        self.pitch = pitch;

        let current = script.zip_with(self.offsets, |s, o| s + o);
        let d = distribute_correction(
            theta_roll,
            &current,
            &self.config.factors,
            &self.config.limits,
        );
        self.offsets = d.targets.zip_with(*script, |t, s| t - s);
        if self.config.pitch_mapping {
            let d = distribute_correction(
                theta_pitch,
                &self.pitch_offsets,
                &self.config.factors,
                &self.config.limits,
            );
            self.pitch_offsets = d.targets;
        }

        let out = ControlOutput {
            theta_e_roll: theta_roll,
            theta_e_pitch: theta_pitch,
            offsets: self.offsets,
            pitch_offsets: self.pitch_offsets,
            clamped: d.clamped,
            frozen: false,
        };
        self.last = Some(out);
        out
    }

    /// Joint targets for the plant: script plus accumulated correction.
    pub fn joint_targets(&self, script: &JointAngles) -> JointAngles {
        let raw = script.zip_with(self.offsets, |s, o| s + o);
        self.config.limits.clamp(raw).0
    }
}
