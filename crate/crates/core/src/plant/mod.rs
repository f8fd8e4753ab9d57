//! Simulated single-support robot.
//!
//! A frontal-plane point-mass inverted pendulum whose center of mass is
//! shifted by the five roll joints. While the CoM projection stays inside the
//! support polygon the stance servos act as a damped spring on the lean
//! angle; once it leaves the polygon nothing holds the body and it tips with
//! the bare pendulum dynamics.

mod dynamics;
mod fall;
mod motion;
mod pads;

pub use dynamics::{
    plant_step, JointSensitivity, PlantParams, PlantState, Support, PHYSICS_DT_MS, PHYSICS_DT_S,
};
pub use fall::fall_check;
pub use motion::{
    play_motion, play_motion_from, MotionError, MotionFrame, MotionSample, MotionScript,
};
pub use pads::{ground_truth_cop, pad_forces_ideal, SensorArray};

use crate::control::JointAngles;

/// Plant state, parameters and sensors advanced together.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: PlantParams,
    pub state: PlantState,
    pub sensors: SensorArray,
}

impl Plant {
    pub fn new(params: PlantParams) -> Self {
        Self {
            sensors: SensorArray::new(&params),
            state: PlantState::default(),
            params,
        }
    }

    /// One physics substep followed by the fall check.
    pub fn step(&mut self, commands: &JointAngles) {
        let next = plant_step(&self.state, &self.params, commands, PHYSICS_DT_S);
        self.state = fall_check(&next, &self.params, PHYSICS_DT_MS);
    }

    pub fn set_support(&mut self, support: Support) {
        self.state.support = support;
    }

    /// Noisy calibrated readings of all eight cells, grams. Left foot first.
    pub fn pad_forces(&mut self) -> [f64; 8] {
        let ideal = pad_forces_ideal(&self.state, &self.params);
        self.sensors.read(&ideal, self.state.t_ms)
    }
}
