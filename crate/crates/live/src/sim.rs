use std::path::PathBuf;

use copbal::calibration::{load_store, save_store, CalibrationCoefficients, CELL_COUNT};
use copbal::control::{JointAngles, PidGains, Setpoints};
use copbal::cop::{CopEstimator, Foot, RobotCop};
use copbal::experiment::{
    Engine, EngineConfig, ExperimentError, PhaseSetpoints, TickSnapshot, Transport, TrialRow,
};
use copbal::plant::{MotionFrame, MotionScript, PlantParams, Support};
use copbal::telemetry::{Channel, ChannelModel, UdpLink, DEFAULT_STALENESS_TIMEOUT_MS};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::command::{Command, CommandError};

/// How the live simulation is set up.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub plant: PlantParams,
    pub gains: PidGains,
    pub channel: ChannelModel,
    /// Send foot-unit packets over loopback UDP on this port instead of the
    /// in-process channel. 0 picks a free port.
    pub udp_port: Option<u16>,
    /// Default location for store save and load.
    pub store_path: PathBuf,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            plant: PlantParams::default(),
            gains: PidGains::new(0.1, 0.0, 0.005).expect("valid defaults"),
            channel: ChannelModel::default(),
            udp_port: None,
            store_path: PathBuf::from("calibration.copc"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Fall,
    NotFall,
}

/// The foot-lift trial being run or last run from the console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatus {
    pub active: bool,
    pub foot: Foot,
    pub control: bool,
    pub started_ms: u64,
    /// Set once the trial ends, by completing or by a stop command.
    pub outcome: Option<TrialOutcome>,
    pub rows: usize,
}

/// One JSON state frame as streamed to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t_ms: u64,
    pub cop: RobotCop,
    pub fresh: bool,
    pub cells: [f64; CELL_COUNT],
    pub joints: JointAngles,
    pub targets: JointAngles,
    pub theta_e: f64,
    pub fallen: bool,
    pub support: Support,
    pub setpoint: Setpoints,
    pub gains: PidGains,
    pub tilt_deg: f64,
    pub control_enabled: bool,
    pub frozen: bool,
    pub trial: Option<TrialStatus>,
}

/// Engine plus the console-facing state around it. Not thread-safe; one
/// task owns it and applies commands between ticks.
#[derive(Debug)]
pub struct LiveSim {
    engine: Engine,
    store_path: PathBuf,
    trial: Option<TrialStatus>,
    rows: Vec<TrialRow>,
}

fn lift_script(foot: Foot, params: &PlantParams) -> (MotionScript, JointAngles, Support) {
    let reference = MotionScript::foot_lift(foot, params);
    let hold = &reference.frames[2];
    let (pose, stance) = (hold.pose(), hold.support);
    let script = MotionScript {
        frames: vec![
            MotionFrame::new(pose, 500, Support::Double),
            // the last frame is held, so the robot stays on one foot
            MotionFrame::new(pose, 1, stance),
        ],
    };
    (script, pose, stance)
}

fn lower_script() -> MotionScript {
    MotionScript {
        frames: vec![MotionFrame::new(
            JointAngles::default(),
            500,
            Support::Double,
        )],
    }
}

impl LiveSim {
    pub fn new(config: SimConfig) -> Result<Self, ExperimentError> {
        let plant = PlantParams {
            noise_seed: config.seed,
            ..config.plant
        };
        let transport = match config.udp_port {
            Some(port) => Transport::Udp(UdpLink::bind(port)?),
            None => Transport::Sim(Channel::new(config.channel.with_seed(config.seed))),
        };
        let engine = Engine::new(
            EngineConfig {
                plant,
                controller: Default::default(),
                gains: config.gains,
                estimator: CopEstimator::default(),
                staleness_timeout_ms: DEFAULT_STALENESS_TIMEOUT_MS,
                control_enabled: true,
            },
            MotionScript::stand(1),
            PhaseSetpoints::default(),
            transport,
        )?;
        Ok(Self {
            engine,
            store_path: config.store_path,
            trial: None,
            rows: Vec::new(),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn trial(&self) -> Option<&TrialStatus> {
        self.trial.as_ref()
    }

    /// Rows logged by the current or most recent trial.
    pub fn trial_rows(&self) -> &[TrialRow] {
        &self.rows
    }

    /// One control period: control update, frame, then physics.
    pub fn tick(&mut self) -> StateFrame {
        let snap = self.engine.control_tick();
        if self.trial.as_ref().is_some_and(|t| t.active) {
            self.rows.push(TrialRow::from(&snap));
            let finished = self.engine.script_finished();
            let outcome = self.outcome();
            let trial = self.trial.as_mut().expect("checked above");
            trial.rows = self.rows.len();
            if finished {
                trial.active = false;
                trial.outcome = Some(outcome);
            }
        }
        let frame = self.frame(&snap);
        self.engine.advance();
        frame
    }

    fn outcome(&self) -> TrialOutcome {
        if self.rows.iter().any(|r| r.fallen) {
            TrialOutcome::Fall
        } else {
            TrialOutcome::NotFall
        }
    }

    fn frame(&self, snap: &TickSnapshot) -> StateFrame {
        StateFrame {
            t_ms: snap.t_ms,
            cop: snap.cop,
            fresh: snap.fresh,
            cells: snap.cells_g,
            joints: snap.joints,
            targets: snap.targets,
            theta_e: snap.theta_e,
            fallen: snap.fallen,
            support: snap.support,
            setpoint: snap.setpoint,
            gains: self.engine.controller().gains(),
            tilt_deg: self.engine.plant().params.tilt_deg,
            control_enabled: self.engine.controller().enabled(),
            frozen: snap.frozen,
            trial: self.trial.clone(),
        }
    }

    fn set_tilt(&mut self, deg: f64) -> Result<(), CommandError> {
        let params = PlantParams {
            tilt_deg: deg,
            ..self.engine.plant().params
        };
        params.validate().map_err(CommandError::Invalid)?;
        self.engine.plant_mut().params.tilt_deg = deg;
        Ok(())
    }

    fn script(&mut self, script: MotionScript) -> Result<(), CommandError> {
        self.engine
            .set_script(script)
            .map_err(|e| CommandError::Invalid(e.to_string()))
    }

    /// Applies a command and returns the values now in effect.
    pub fn apply(&mut self, command: Command) -> Result<Value, CommandError> {
        let cell_index = |cell: usize| {
            if cell < CELL_COUNT {
                Ok(cell)
            } else {
                Err(CommandError::Invalid(format!(
                    "cell {cell} outside 0..{CELL_COUNT}"
                )))
            }
        };
        match command {
            Command::Gains { kp, ki, kd } => {
                let gains =
                    PidGains::new(kp, ki, kd).map_err(|e| CommandError::Invalid(e.to_string()))?;
                self.engine.controller_mut().set_gains(gains);
                Ok(json!(gains))
            }
            Command::Setpoint { support, x, y } => {
                let sp = Setpoints::new(x, y).map_err(|e| CommandError::Invalid(e.to_string()))?;
                self.engine.setpoints_mut().set(support, sp);
                Ok(json!({ "support": support, "x": sp.x, "y": sp.y }))
            }
            Command::Tare { cell } => {
                let cell = cell_index(cell)?;
                self.engine.tare(cell);
                let c = *self.engine.plant().sensors.store().get(cell);
                Ok(json!({ "cell": cell, "coefficients": c }))
            }
            Command::Calibration {
                cell,
                gradient,
                offset_counts,
            } => {
                let cell = cell_index(cell)?;
                if !(gradient.is_finite() && gradient > 0.0) || !offset_counts.is_finite() {
                    return Err(CommandError::Invalid(
                        "gradient must be positive and both values finite".into(),
                    ));
                }
                let cell_id = self.engine.plant().sensors.store().get(cell).cell_id;
                let c = CalibrationCoefficients::new(cell_id, gradient, offset_counts);
                self.engine.plant_mut().sensors.set_coefficients(cell, c);
                Ok(json!({ "cell": cell, "coefficients": c }))
            }
            Command::SaveStore { path } => {
                let path = path.unwrap_or_else(|| self.store_path.clone());
                let store = self.engine.plant().sensors.store().clone();
                save_store(&store, &path).map_err(|e| CommandError::Store(e.to_string()))?;
                Ok(json!({ "path": path, "cells": store.cells() }))
            }
            Command::LoadStore { path } => {
                let path = path.unwrap_or_else(|| self.store_path.clone());
                let store = load_store(&path).map_err(|e| CommandError::Store(e.to_string()))?;
                self.engine.plant_mut().sensors.set_store(store.clone());
                Ok(json!({ "path": path, "cells": store.cells() }))
            }
            Command::StartTrial {
                foot,
                control,
                tilt_deg,
            } => {
                if let Some(mag) = tilt_deg {
                    // as in batch trials, the magnitude tips toward the stance foot's outer edge
                    let signed = match foot {
                        Foot::Right => -mag.abs(),
                        Foot::Left => mag.abs(),
                    };
                    self.set_tilt(signed)?;
                }
                let script = MotionScript::foot_lift(foot, &self.engine.plant().params);
                self.script(script)?;
                self.engine.reset_plant();
                self.engine.controller_mut().set_enabled(control);
                self.rows.clear();
                self.trial = Some(TrialStatus {
                    active: true,
                    foot,
                    control,
                    started_ms: self.engine.t_ms(),
                    outcome: None,
                    rows: 0,
                });
                Ok(json!({
                    "foot": foot,
                    "control": control,
                    "tilt_deg": self.engine.plant().params.tilt_deg,
                    "started_ms": self.engine.t_ms(),
                }))
            }
            Command::StopTrial => {
                let outcome = self.outcome();
                match &mut self.trial {
                    Some(t) if t.active => {
                        t.active = false;
                        t.outcome = Some(outcome);
                        Ok(json!(t))
                    }
                    _ => Err(CommandError::Conflict("no trial is running".into())),
                }
            }
            Command::Tilt { deg } => {
                self.set_tilt(deg)?;
                Ok(json!({ "tilt_deg": deg }))
            }
            Command::LiftFoot { foot } => {
                let (script, pose, stance) = lift_script(foot, &self.engine.plant().params);
                self.script(script)?;
                Ok(json!({ "foot": foot, "support": stance, "pose": pose }))
            }
            Command::LowerFoot => {
                self.script(lower_script())?;
                Ok(json!({ "support": Support::Double }))
            }
            Command::Control { enabled } => {
                self.engine.controller_mut().set_enabled(enabled);
                Ok(json!({ "enabled": enabled }))
            }
            Command::Reset => {
                self.script(MotionScript::stand(1))?;
                self.engine.reset_plant();
                Ok(json!({ "fallen": false }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim() -> LiveSim {
        LiveSim::new(SimConfig::default()).unwrap()
    }

    #[test]
    fn gains_apply_on_the_next_tick() {
        let mut s = sim();
        s.tick();
        s.apply(Command::Gains {
            kp: 0.2,
            ki: 0.01,
            kd: 0.0,
        })
        .unwrap();
        assert_eq!(s.tick().gains, PidGains::new(0.2, 0.01, 0.0).unwrap());
        assert!(s
            .apply(Command::Gains {
                kp: -1.0,
                ki: 0.0,
                kd: 0.0
            })
            .is_err());
    }

    #[test]
    fn lift_holds_single_support_and_lower_returns() {
        let mut s = sim();
        s.apply(Command::LiftFoot { foot: Foot::Right }).unwrap();
        // shift, then let the stance settle
        for _ in 0..40 {
            s.tick();
        }
        let f = s.tick();
        assert_eq!(f.support, Support::LeftOnly);
        assert!(f.cop.x < -0.8, "{}", f.cop.x);
        s.apply(Command::LowerFoot).unwrap();
        for _ in 0..20 {
            s.tick();
        }
        assert_eq!(s.tick().support, Support::Double);
    }

    #[test]
    fn uncontrolled_trial_falls_and_finishes() {
        let mut s = sim();
        s.apply(Command::StartTrial {
            foot: Foot::Right,
            control: false,
            tilt_deg: Some(3.0),
        })
        .unwrap();
        let mut last = s.tick();
        while last.trial.as_ref().unwrap().active {
            last = s.tick();
        }
        assert!(last.fallen);
        assert_eq!(last.trial.unwrap().outcome, Some(TrialOutcome::Fall));
        assert_eq!(s.trial_rows().len(), 121);
        assert!(s.apply(Command::StopTrial).is_err());
        s.apply(Command::Reset).unwrap();
        s.tick();
        assert!(!s.tick().fallen);
    }

    #[test]
    fn bad_cells_are_rejected() {
        let mut s = sim();
        assert!(matches!(
            s.apply(Command::Tare { cell: 8 }),
            Err(CommandError::Invalid(_))
        ));
        assert!(s
            .apply(Command::Calibration {
                cell: 0,
                gradient: 0.0,
                offset_counts: 1.0
            })
            .is_err());
        assert!(s.apply(Command::Tilt { deg: 40.0 }).is_err());
    }
}
