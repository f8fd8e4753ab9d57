use serde::{Deserialize, Serialize};

use crate::calibration::NoiseModel;
use crate::control::JointAngles;

/// Physics substep. The controller runs every tenth substep.
pub const PHYSICS_DT_MS: u64 = 5;
pub const PHYSICS_DT_S: f64 = PHYSICS_DT_MS as f64 / 1000.0;

/// Which feet bear load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    #[default]
    Double,
    #[serde(rename = "left")]
    LeftOnly,
    #[serde(rename = "right")]
    RightOnly,
}

impl Support {
    pub fn is_single(self) -> bool {
        self != Support::Double
    }
}

/// Lateral CoM shift per degree of joint roll, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSensitivity {
    pub torso: f64,
    pub hip: f64,
    pub ankle: f64,
}

impl Default for JointSensitivity {
    fn default() -> Self {
        Self {
            torso: 0.0025,
            hip: 0.004,
            ankle: 0.0015,
        }
    }
}

impl JointSensitivity {
    /// CoM shift toward +X produced by a set of joint angles, meters.
    pub fn com_shift(&self, j: &JointAngles) -> f64 {
        self.torso * j.torso + self.hip * (j.hip_l + j.hip_r) + self.ankle * (j.ankle_l + j.ankle_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub com_height_m: f64,
    pub mass_kg: f64,
    /// Surface roll. Positive values push the CoM toward +X.
    pub tilt_deg: f64,
    /// Half the lateral pad spacing of one foot; one normalized CoP unit.
    pub foot_half_width_m: f64,
    pub gravity: f64,
    pub noise_seed: u64,
    pub sensitivity: JointSensitivity,
    pub slew_rate_deg_s: f64,
    /// First-order servo response time constant; zero follows the command
    /// as fast as the slew limit allows.
    pub servo_lag_ms: f64,
    /// Stance lean stiffness over `g / h` in single support. Above 1 the lean
    /// settles, and the static CoM offset is amplified by `r / (r - 1)`.
    pub stance_stiffness_ratio: f64,
    /// Same for double support, where the closed chain is much stiffer.
    pub double_stiffness_ratio: f64,
    /// Damping of the supported lean mode relative to critical.
    pub damping_ratio: f64,
    /// Time the projection may stay outside the polygon before a fall.
    pub fall_window_ms: u64,
    /// Sagittal CoP reported by the pads; the plant has no pitch dynamics.
    pub cop_y: f64,
    pub noise: NoiseModel,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            com_height_m: 0.30,
            mass_kg: 3.0,
            tilt_deg: 0.0,
            foot_half_width_m: 0.02,
            gravity: 9.81,
            noise_seed: 0,
            sensitivity: JointSensitivity::default(),
            slew_rate_deg_s: 200.0,
            servo_lag_ms: 0.0,
            stance_stiffness_ratio: 1.5,
            double_stiffness_ratio: 10.0,
            damping_ratio: 1.0,
            fall_window_ms: 300,
            cop_y: 0.0,
            noise: NoiseModel::default(),
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.com_height_m > 0.0) {
            return Err("com_height_m must be positive".into());
        }
        if !(self.mass_kg > 0.0) {
            return Err("mass_kg must be positive".into());
        }
        if !(self.tilt_deg.abs() < 15.0) {
            return Err("|tilt_deg| must be below 15".into());
        }
        if !(self.foot_half_width_m > 0.0) {
            return Err("foot_half_width_m must be positive".into());
        }
        if !(self.servo_lag_ms >= 0.0) {
            return Err("servo_lag_ms must be non-negative".into());
        }
        if !(self.slew_rate_deg_s > 0.0) {
            return Err("slew_rate_deg_s must be positive".into());
        }
        Ok(())
    }

    /// `g / h`, the squared divergence rate of the bare pendulum.
    pub fn omega_sq(&self) -> f64 {
        self.gravity / self.com_height_m
    }

    pub fn tilt_rad(&self) -> f64 {
        self.tilt_deg.to_radians()
    }

    /// Total weight in grams.
    pub fn weight_g(&self) -> f64 {
        self.mass_kg * 1000.0
    }

    /// Support polygon as `(min_x, max_x)` in meters, robot frame.
    pub fn polygon(&self, support: Support) -> (f64, f64) {
        let w = self.foot_half_width_m;
        match support {
            Support::Double => (-2.0 * w, 2.0 * w),
            Support::LeftOnly => (-2.0 * w, 0.0),
            Support::RightOnly => (0.0, 2.0 * w),
        }
    }

    /// Pendulum pivot, the center of the support polygon.
    pub fn pivot(&self, support: Support) -> f64 {
        let (lo, hi) = self.polygon(support);
        0.5 * (lo + hi)
    }

    fn lean_stiffness_and_damping(&self, support: Support) -> (f64, f64) {
        let ratio = match support {
            Support::Double => self.double_stiffness_ratio,
            _ => self.stance_stiffness_ratio,
        };
        let k = ratio * self.omega_sq();
        let net = (k - self.omega_sq()).max(0.0);
        (k, 2.0 * self.damping_ratio * net.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub roll_angle_rad: f64,
    pub roll_rate_rad_s: f64,
    pub joint_angles_deg: JointAngles,
    pub support: Support,
    /// Latched; never cleared within a trial.
    pub fallen: bool,
    pub t_ms: u64,
    pub cop_excursion_timer_ms: u64,
}

impl Default for PlantState {
    fn default() -> Self {
        Self {
            roll_angle_rad: 0.0,
            roll_rate_rad_s: 0.0,
            joint_angles_deg: JointAngles::default(),
            support: Support::Double,
            fallen: false,
            t_ms: 0,
            cop_excursion_timer_ms: 0,
        }
    }
}

impl PlantState {
    /// CoM shift produced by the current joint angles, meters toward +X.
    pub fn com_shift(&self, params: &PlantParams) -> f64 {
        params.sensitivity.com_shift(&self.joint_angles_deg)
    }

    /// Unclamped CoM ground projection, meters in the robot frame.
    pub fn com_projection(&self, params: &PlantParams) -> f64 {
        params.com_height_m * (self.roll_angle_rad + params.tilt_rad()).sin()
            + self.com_shift(params)
    }

    pub fn projection_inside(&self, params: &PlantParams) -> bool {
        let (lo, hi) = params.polygon(self.support);
        let p = self.com_projection(params);
        p >= lo && p <= hi
    }

    /// Roll acceleration for the current state.
    ///
    /// Bare pendulum term `(g/h) sin(roll + tilt) - (g/h) (offset / h)` where
    /// `offset` is the pivot minus the joint-driven CoM shift, plus the stance
    /// spring and damper while the projection is inside the polygon.
    pub fn roll_accel(&self, params: &PlantParams) -> f64 {
        let w2 = params.omega_sq();
        let h = params.com_height_m;
        let offset = params.pivot(self.support) - self.com_shift(params);
        let mut accel = w2 * (self.roll_angle_rad + params.tilt_rad()).sin() - w2 * (offset / h);
        if self.projection_inside(params) {
            let (k, c) = params.lean_stiffness_and_damping(self.support);
            accel -= k * self.roll_angle_rad + c * self.roll_rate_rad_s;
        }
        accel
    }
}

fn slew(current: f64, target: f64, max_step: f64, follow: f64) -> f64 {
    current + ((target - current) * follow).clamp(-max_step, max_step)
}

/// Advances joints and the roll pendulum by `dt` (semi-implicit Euler).
///
/// Does not evaluate the fall criterion; see [`super::fall_check`].
pub fn plant_step(
    state: &PlantState,
    params: &PlantParams,
    commands: &JointAngles,
    dt: f64,
) -> PlantState {
    debug_assert!(commands.is_finite(), "non-finite joint command");
    let max_step = params.slew_rate_deg_s * dt;
    let follow = if params.servo_lag_ms > 0.0 {
        1.0 - (-dt * 1000.0 / params.servo_lag_ms).exp()
    } else {
        1.0
    };
    let mut next = *state;
    next.joint_angles_deg = state
        .joint_angles_deg
        .zip_with(*commands, |c, t| slew(c, t, max_step, follow));

    let accel = next.roll_accel(params);
    next.roll_rate_rad_s += accel * dt;
    next.roll_angle_rad += next.roll_rate_rad_s * dt;
    // lying on the floor
    let limit = std::f64::consts::FRAC_PI_2;
    if next.roll_angle_rad.abs() > limit {
        next.roll_angle_rad = next.roll_angle_rad.clamp(-limit, limit);
        next.roll_rate_rad_s = 0.0;
    }
    next.t_ms = state.t_ms + (dt * 1000.0).round() as u64;
    next
}
