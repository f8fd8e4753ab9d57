use serde::{Deserialize, Serialize};

/// Names used for the five compensation joints in scripts and logs.
pub const JOINT_NAMES: [&str; 5] = ["torso", "hip_l", "hip_r", "ankle_l", "ankle_r"];

/// Roll angles of the five compensation joints, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles {
    pub torso: f64,
    pub hip_l: f64,
    pub hip_r: f64,
    pub ankle_l: f64,
    pub ankle_r: f64,
}

impl JointAngles {
    pub fn to_array(self) -> [f64; 5] {
        [
            self.torso,
            self.hip_l,
            self.hip_r,
            self.ankle_l,
            self.ankle_r,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            torso: a[0],
            hip_l: a[1],
            hip_r: a[2],
            ankle_l: a[3],
            ankle_r: a[4],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = JOINT_NAMES.iter().position(|n| *n == name)?;
        Some(self.to_array()[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let Some(i) = JOINT_NAMES.iter().position(|n| *n == name) else {
            return false;
        };
        let mut a = self.to_array();
        a[i] = value;
        *self = Self::from_array(a);
        true
    }

    pub fn zip_with(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|i| f(a[i], b[i])))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Share of the roll correction given to each joint group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationFactors {
    pub torso: f64,
    pub hip: f64,
    pub ankle: f64,
}

impl Default for CompensationFactors {
    fn default() -> Self {
        Self {
            torso: 0.8,
            hip: 1.0,
            ankle: 0.4,
        }
    }
}

/// Allowed range around neutral for every joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub neutral: JointAngles,
    pub range_deg: f64,
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            neutral: JointAngles::default(),
            range_deg: 30.0,
        }
    }
}

impl JointLimits {
    /// Clamps every joint, reporting whether any was limited.
    pub fn clamp(&self, angles: JointAngles) -> (JointAngles, bool) {
        let r = self.range_deg;
        let out = angles.zip_with(self.neutral, |a, n| a.clamp(n - r, n + r));
        (out, out != angles)
    }

    pub fn contains(&self, angles: &JointAngles) -> bool {
        self.clamp(*angles).0 == *angles
    }
}

/// Per-group deltas derived from one roll correction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointCorrection {
    pub theta_e: f64,
    pub torso: f64,
    pub hip: f64,
    pub ankle: f64,
}

impl JointCorrection {
    pub fn new(theta_e: f64, factors: &CompensationFactors) -> Self {
        Self {
            theta_e,
            torso: factors.torso * theta_e,
            hip: factors.hip * theta_e,
            ankle: factors.ankle * theta_e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    pub correction: JointCorrection,
    /// New joint targets after clamping.
    pub targets: JointAngles,
    pub clamped: bool,
}

/// Adds a roll correction to the current joint angles.
///
/// Both hips and both ankles get the same signed delta.
pub fn distribute_correction(
    theta_e: f64,
    current: &JointAngles,
    factors: &CompensationFactors,
    limits: &JointLimits,
) -> Distribution {
    let correction = JointCorrection::new(theta_e, factors);
    let raw = JointAngles {
        torso: current.torso + correction.torso,
        hip_l: current.hip_l + correction.hip,
        hip_r: current.hip_r + correction.hip,
        ankle_l: current.ankle_l + correction.ankle,
        ankle_r: current.ankle_r + correction.ankle,
    };
    let (targets, clamped) = limits.clamp(raw);
    Distribution {
        correction,
        targets,
        clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn distribute(theta: f64) -> Distribution {
        distribute_correction(
            theta,
            &JointAngles::default(),
            &CompensationFactors::default(),
            &JointLimits::default(),
        )
    }

    #[test]
    fn one_degree() {
        let d = distribute(1.0);
        assert_eq!(d.targets.torso, 0.8);
        assert_eq!(d.targets.hip_l, 1.0);
        assert_eq!(d.targets.hip_r, 1.0);
        assert_eq!(d.targets.ankle_l, 0.4);
        assert_eq!(d.targets.ankle_r, 0.4);
        assert!(!d.clamped);
    }

    #[test]
    fn zero_correction() {
        let d = distribute(0.0);
        assert_eq!(d.targets, JointAngles::default());
        assert_eq!(d.correction.torso, 0.0);
    }

    #[test]
    fn saturation() {
        let d = distribute(100.0);
        assert!(d.clamped);
        assert_eq!(d.targets.to_array(), [30.0; 5]);
        let d = distribute(-100.0);
        assert_eq!(d.targets.to_array(), [-30.0; 5]);
    }

    #[test]
    fn accumulates_on_current() {
        let current = JointAngles::from_array([1.0, 2.0, 3.0, 4.0, 5.0]);
        let d = distribute_correction(
            0.5,
            &current,
            &CompensationFactors::default(),
            &JointLimits::default(),
        );
        assert_eq!(d.targets.to_array(), [1.4, 2.5, 3.5, 4.2, 5.2]);
    }

    #[test]
    fn named_access() {
        let mut j = JointAngles::default();
        assert!(j.set("hip_r", 3.0));
        assert!(!j.set("elbow", 1.0));
        assert_eq!(j.get("hip_r"), Some(3.0));
        assert_eq!(j.get("nope"), None);
    }

    proptest! {
        #[test]
        fn ratio_is_preserved(theta in -1.0e3..1.0e3f64) {
            prop_assume!(theta != 0.0);
            let c = JointCorrection::new(theta, &CompensationFactors::default());
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            prop_assert!(rel(c.torso / c.hip, 0.8) < 1e-12);
            prop_assert!(rel(c.ankle / c.hip, 0.4) < 1e-12);
            prop_assert!(rel(c.hip, theta) < 1e-12);
        }
    }
}
