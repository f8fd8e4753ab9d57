use serde::{Deserialize, Serialize};

use super::{ExperimentError, PhaseSetpoints};
use crate::control::{ControllerConfig, PidGains};
use crate::cop::Foot;
use crate::plant::{MotionScript, PlantParams};
use crate::telemetry::{ChannelModel, DEFAULT_STALENESS_TIMEOUT_MS};

/// Which foot each trial lifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftSide {
    Left,
    Right,
    /// Right on even trial indices, left on odd.
    #[default]
    Alternate,
}

impl LiftSide {
    pub fn foot_for(self, trial_index: usize) -> Foot {
        match self {
            LiftSide::Left => Foot::Left,
            LiftSide::Right => Foot::Right,
            LiftSide::Alternate if trial_index.is_multiple_of(2) => Foot::Right,
            LiftSide::Alternate => Foot::Left,
        }
    }
}

impl std::str::FromStr for LiftSide {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(LiftSide::Left),
            "right" | "r" => Ok(LiftSide::Right),
            "alternate" | "alt" | "both" => Ok(LiftSide::Alternate),
            other => Err(ExperimentError::ConfigError(format!(
                "unknown foot {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptKind {
    FootLift,
    Stand { duration_ms: u64 },
    Custom { script: MotionScript },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub gains: PidGains,
    /// Surface roll magnitude. It always leans the robot toward the outer
    /// edge of the stance foot, the direction that tips it over.
    pub tilt_deg: f64,
    pub foot: LiftSide,
    pub trials: usize,
    /// Trial `i` uses `seed + i`.
    pub seed: u64,
    pub channel: ChannelModel,
    pub control_enabled: bool,
    pub script: ScriptKind,
    /// Base plant; `tilt_deg` and `noise_seed` are overwritten per trial.
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub staleness_timeout_ms: u64,
    /// Fixed setpoints. `None` captures them from a flat-ground reference run.
    pub setpoints: Option<PhaseSetpoints>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            gains: PidGains::new(0.1, 0.0, 0.005).expect("valid gains"),
            tilt_deg: 3.0,
            foot: LiftSide::Alternate,
            trials: 6,
            seed: 1,
            channel: ChannelModel::default(),
            control_enabled: true,
            script: ScriptKind::FootLift,
            plant: PlantParams::default(),
            controller: ControllerConfig::default(),
            staleness_timeout_ms: DEFAULT_STALENESS_TIMEOUT_MS,
            setpoints: None,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::ConfigError(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.channel.loss_prob) {
            return bad(format!(
                "loss_prob {} outside [0, 1]",
                self.channel.loss_prob
            ));
        }
        if PidGains::new(self.gains.kp, self.gains.ki, self.gains.kd).is_err() {
            return bad(format!("invalid gains {:?}", self.gains));
        }
        if !(self.controller.dt_s > 0.0) {
            return bad("controller dt must be positive".into());
        }
        let plant = PlantParams {
            tilt_deg: self.tilt_deg,
            ..self.plant
        };
        plant.validate().map_err(ExperimentError::ConfigError)?;
        if let ScriptKind::Custom { script } = &self.script {
            script.validate(&self.controller.limits)?;
        }
        if let ScriptKind::Stand { duration_ms: 0 } = self.script {
            return bad("stand duration must be positive".into());
        }
        Ok(())
    }

    /// Seed of trial `index`.
    pub fn trial_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    /// Signed plant tilt for a trial lifting `lifted`.
    pub fn plant_tilt(&self, lifted: Foot) -> f64 {
        match lifted {
            // standing on the left foot, tipping toward -X
            Foot::Right => -self.tilt_deg,
            Foot::Left => self.tilt_deg,
        }
    }

    pub fn motion_script(&self, lifted: Foot, plant: &PlantParams) -> MotionScript {
        match &self.script {
            ScriptKind::FootLift => MotionScript::foot_lift(lifted, plant),
            ScriptKind::Stand { duration_ms } => MotionScript::stand(*duration_ms),
            ScriptKind::Custom { script } => script.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternate_starts_right() {
        assert_eq!(LiftSide::Alternate.foot_for(0), Foot::Right);
        assert_eq!(LiftSide::Alternate.foot_for(1), Foot::Left);
        assert_eq!(LiftSide::Left.foot_for(0), Foot::Left);
        assert_eq!("ALT".parse::<LiftSide>().unwrap(), LiftSide::Alternate);
        assert!("up".parse::<LiftSide>().is_err());
    }

    #[test]
    fn validation() {
        assert!(TrialConfig::default().validate().is_ok());
        let mut c = TrialConfig {
            trials: 0,
            ..TrialConfig::default()
        };
        assert!(c.validate().is_err());
        c.trials = 1;
        c.channel.loss_prob = 1.5;
        assert!(c.validate().is_err());
        c.channel.loss_prob = 0.0;
        c.tilt_deg = 40.0;
        assert!(c.validate().is_err());
        c.tilt_deg = 3.0;
        c.gains.kd = -1.0;
        assert!(c.validate().is_err());
    }
}
