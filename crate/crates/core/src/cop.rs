//! Center-of-pressure estimation.
//!
//! Each foot carries four pads in a normalized foot-local frame, corners at
//! `(±1, ±1)`. The robot frame places the left foot center at `X = -1` and the
//! right foot center at `X = +1`, so the robot X axis spans `[-2, 2]` and Y
//! spans `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::calibration::CELLS_PER_FOOT;

/// Total force below which a foot (or the robot) is treated as unloaded.
pub const DEFAULT_DEADBAND_G: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub const BOTH: [Foot; 2] = [Foot::Left, Foot::Right];

    pub fn index(self) -> usize {
        match self {
            Foot::Left => 0,
            Foot::Right => 1,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            0 => Some(Foot::Left),
            1 => Some(Foot::Right),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Foot::Left => Foot::Right,
            Foot::Right => Foot::Left,
        }
    }
}

/// Pad positions in the foot-local frame, one per cell.
///
/// Cell order is front-left, front-right, rear-left, rear-right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadGeometry {
    pub positions: [[f64; 2]; CELLS_PER_FOOT],
}

impl Default for PadGeometry {
    fn default() -> Self {
        Self {
            positions: [[-1.0, 1.0], [1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
        }
    }
}

impl PadGeometry {
    /// Rejects geometries with coincident pads.
    pub fn new(positions: [[f64; 2]; CELLS_PER_FOOT]) -> Option<Self> {
        for i in 0..CELLS_PER_FOOT {
            for j in i + 1..CELLS_PER_FOOT {
                if positions[i] == positions[j] {
                    return None;
                }
            }
        }
        Some(Self { positions })
    }
}

/// Per-foot CoP, the telemetry payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootCopSample {
    pub foot: Foot,
    /// Sum of the (clamped) cell masses, grams.
    pub f_total: f64,
    pub x_cop: f64,
    pub y_cop: f64,
    /// Cell masses after clamping at zero, grams.
    pub per_cell: [f64; CELLS_PER_FOOT],
    pub timestamp_ms: u32,
}

impl FootCopSample {
    pub fn unloaded(foot: Foot, timestamp_ms: u32) -> Self {
        Self {
            foot,
            f_total: 0.0,
            x_cop: 0.0,
            y_cop: 0.0,
            per_cell: [0.0; CELLS_PER_FOOT],
            timestamp_ms,
        }
    }
}

/// Robot-level CoP in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotCop {
    pub f_total: f64,
    pub x: f64,
    pub y: f64,
}

/// Robot-frame X of each foot center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootOffsets {
    pub left_x: f64,
    pub right_x: f64,
}

impl Default for FootOffsets {
    fn default() -> Self {
        Self {
            left_x: -1.0,
            right_x: 1.0,
        }
    }
}

impl FootOffsets {
    pub fn of(&self, foot: Foot) -> f64 {
        match foot {
            Foot::Left => self.left_x,
            Foot::Right => self.right_x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopEstimator {
    pub geometry: PadGeometry,
    pub offsets: FootOffsets,
    pub deadband_g: f64,
}

impl Default for CopEstimator {
    fn default() -> Self {
        Self {
            geometry: PadGeometry::default(),
            offsets: FootOffsets::default(),
            deadband_g: DEFAULT_DEADBAND_G,
        }
    }
}

impl CopEstimator {
    /// Force-weighted centroid of the pads of one foot.
    pub fn foot_cop(
        &self,
        foot: Foot,
        masses_g: [f64; CELLS_PER_FOOT],
        timestamp_ms: u32,
    ) -> FootCopSample {
        let per_cell = masses_g.map(|m| if m > 0.0 { m } else { 0.0 });
        let f_total: f64 = per_cell.iter().sum();
        let (x_cop, y_cop) = if f_total < self.deadband_g {
            (0.0, 0.0)
        } else {
            let (mut sx, mut sy) = (0.0, 0.0);
            for (m, [px, py]) in per_cell.iter().zip(self.geometry.positions) {
                sx += m * px;
                sy += m * py;
            }
            (sx / f_total, sy / f_total)
        };
        FootCopSample {
            foot,
            f_total,
            x_cop,
            y_cop,
            per_cell,
            timestamp_ms,
        }
    }

    /// Fuses both feet into the robot frame.
    pub fn robot_cop(&self, left: &FootCopSample, right: &FootCopSample) -> RobotCop {
        let f_total = left.f_total + right.f_total;
        if f_total < self.deadband_g {
            // lifted off the ground
            return RobotCop {
                f_total,
                x: 0.0,
                y: 0.0,
            };
        }
        let xl = left.x_cop + self.offsets.left_x;
        let xr = right.x_cop + self.offsets.right_x;
        RobotCop {
            f_total,
            x: (left.f_total * xl + right.f_total * xr) / f_total,
            y: (left.f_total * left.y_cop + right.f_total * right.y_cop) / f_total,
        }
    }
}

/// [`CopEstimator::foot_cop`] with default geometry and deadband.
pub fn foot_cop(foot: Foot, masses_g: [f64; CELLS_PER_FOOT]) -> FootCopSample {
    CopEstimator::default().foot_cop(foot, masses_g, 0)
}

/// [`CopEstimator::robot_cop`] with default offsets and deadband.
pub fn robot_cop(left: &FootCopSample, right: &FootCopSample) -> RobotCop {
    CopEstimator::default().robot_cop(left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(foot: Foot, f: f64, x: f64) -> FootCopSample {
        FootCopSample {
            foot,
            f_total: f,
            x_cop: x,
            y_cop: 0.0,
            per_cell: [f / 4.0; 4],
            timestamp_ms: 0,
        }
    }

    #[test]
    fn symmetric_load_is_centered() {
        let s = foot_cop(Foot::Left, [250.0; 4]);
        assert_eq!((s.x_cop, s.y_cop, s.f_total), (0.0, 0.0, 1000.0));
    }

    #[test]
    fn single_pad() {
        let s = foot_cop(Foot::Right, [0.0, 400.0, 0.0, 0.0]);
        assert_eq!((s.x_cop, s.y_cop, s.f_total), (1.0, 1.0, 400.0));
    }

    #[test]
    fn weighted_centroid() {
        let s = foot_cop(Foot::Left, [100.0, 300.0, 100.0, 300.0]);
        assert_eq!(s.x_cop, 0.5);
        assert_eq!(s.y_cop, 0.0);
    }

    #[test]
    fn below_deadband_reports_origin() {
        let s = foot_cop(Foot::Left, [0.0, 19.0, 0.0, 0.0]);
        assert_eq!((s.x_cop, s.y_cop), (0.0, 0.0));
        assert_eq!(s.f_total, 19.0);
    }

    #[test]
    fn negative_masses_are_clamped() {
        let s = foot_cop(Foot::Left, [-30.0, 200.0, -1.0, 200.0]);
        assert_eq!(s.per_cell, [0.0, 200.0, 0.0, 200.0]);
        assert_eq!(s.f_total, 400.0);
        assert_eq!(s.x_cop, 1.0);
    }

    #[test]
    fn double_support_symmetric() {
        let c = robot_cop(
            &sample(Foot::Left, 500.0, 0.0),
            &sample(Foot::Right, 500.0, 0.0),
        );
        assert_eq!((c.x, c.y, c.f_total), (0.0, 0.0, 1000.0));
    }

    #[test]
    fn single_support_on_left() {
        let c = robot_cop(
            &sample(Foot::Left, 2900.0, -0.30),
            &sample(Foot::Right, 0.0, 0.0),
        );
        assert!((c.x + 1.30).abs() < 1e-12);
    }

    #[test]
    fn weighted_mean_of_feet() {
        let c = robot_cop(
            &sample(Foot::Left, 600.0, 0.0),
            &sample(Foot::Right, 200.0, 0.0),
        );
        assert_eq!(c.x, -0.5);
    }

    #[test]
    fn lifted_robot_is_origin() {
        let c = robot_cop(
            &sample(Foot::Left, 5.0, 1.0),
            &sample(Foot::Right, 5.0, 1.0),
        );
        assert_eq!((c.x, c.y), (0.0, 0.0));
    }

    #[test]
    fn coincident_pads_rejected() {
        assert!(PadGeometry::new([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [-1.0, 1.0]]).is_none());
        assert!(PadGeometry::new(PadGeometry::default().positions).is_some());
    }
}
