use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PlantParams, Support};
use crate::control::{CompensationFactors, JointAngles, JointLimits, JOINT_NAMES};
use crate::cop::Foot;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("malformed motion script: {0}")]
    MalformedScript(String),
    #[error("motion script json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One keyframe: the pose to reach and how long to take getting there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionFrame {
    /// Joint name to degrees. Missing joints are neutral.
    pub joints: BTreeMap<String, f64>,
    pub duration_ms: u64,
    /// Support phase while this frame plays.
    pub support: Support,
}

impl MotionFrame {
    pub fn new(pose: JointAngles, duration_ms: u64, support: Support) -> Self {
        let joints = JOINT_NAMES
            .iter()
            .zip(pose.to_array())
            .map(|(n, v)| (n.to_string(), v))
            .collect();
        Self {
            joints,
            duration_ms,
            support,
        }
    }

    pub fn pose(&self) -> JointAngles {
        let mut pose = JointAngles::default();
        for (name, v) in &self.joints {
            pose.set(name, *v);
        }
        pose
    }
}

/// Keyframe sequence starting from the neutral pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionScript {
    pub frames: Vec<MotionFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    pub targets: JointAngles,
    pub support: Support,
    pub frame: usize,
}

impl MotionScript {
    pub fn new(frames: Vec<MotionFrame>) -> Result<Self, MotionError> {
        let script = Self { frames };
        script.validate(&JointLimits::default())?;
        Ok(script)
    }

    pub fn validate(&self, limits: &JointLimits) -> Result<(), MotionError> {
        let bad = |m: String| Err(MotionError::MalformedScript(m));
        if self.frames.is_empty() {
            return bad("no frames".into());
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.duration_ms == 0 {
                return bad(format!("frame {i} has zero duration"));
            }
            if let Some(name) = f.joints.keys().find(|n| !JOINT_NAMES.contains(&n.as_str())) {
                return bad(format!("frame {i} names unknown joint {name:?}"));
            }
            let pose = f.pose();
            if !pose.is_finite() || !limits.contains(&pose) {
                return bad(format!("frame {i} target outside joint limits"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MotionError> {
        let script: Self = serde_json::from_str(text)?;
        script.validate(&JointLimits::default())?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn duration_ms(&self) -> u64 {
        self.frames.iter().map(|f| f.duration_ms).sum()
    }

    /// `(start_ms, support)` for every change of support phase, including t = 0.
    pub fn support_events(&self) -> Vec<(u64, Support)> {
        let mut out: Vec<(u64, Support)> = Vec::new();
        let mut t = 0;
        for f in &self.frames {
            if out.last().map(|(_, s)| *s) != Some(f.support) {
                out.push((t, f.support));
            }
            t += f.duration_ms;
        }
        out
    }

    /// Standing still in double support.
    pub fn stand(duration_ms: u64) -> Self {
        Self {
            frames: vec![MotionFrame::new(
                JointAngles::default(),
                duration_ms,
                Support::Double,
            )],
        }
    }

    /// Foot-lift test: stand 2 s, shift weight and lift over 0.5 s, hold on
    /// one foot for 3 s, lower over 0.5 s.
    ///
    /// The weight shift moves the CoM over the stance foot center using the
    /// compensation factor ratios.
    pub fn foot_lift(lifted: Foot, params: &PlantParams) -> Self {
        let (stance, direction) = match lifted {
            Foot::Right => (Support::LeftOnly, -1.0),
            Foot::Left => (Support::RightOnly, 1.0),
        };
        let f = CompensationFactors::default();
        let s = params.sensitivity;
        let per_unit = s.torso * f.torso + 2.0 * s.hip * f.hip + 2.0 * s.ankle * f.ankle;
        let k = direction * params.foot_half_width_m / per_unit;
        let shifted = JointAngles {
            torso: f.torso * k,
            hip_l: f.hip * k,
            hip_r: f.hip * k,
            ankle_l: f.ankle * k,
            ankle_r: f.ankle * k,
        };
        let neutral = JointAngles::default();
        Self {
            frames: vec![
                MotionFrame::new(neutral, 2000, Support::Double),
                MotionFrame::new(shifted, 500, Support::Double),
                MotionFrame::new(shifted, 3000, stance),
                MotionFrame::new(neutral, 500, Support::Double),
            ],
        }
    }
}

/// Joint targets and support phase at `t_ms`, linearly interpolated between
/// keyframes. The last frame is held after the script ends.
pub fn play_motion(script: &MotionScript, t_ms: u64) -> Result<MotionSample, MotionError> {
    play_motion_from(script, JointAngles::default(), t_ms)
}

/// [`play_motion`] for a script that starts from an arbitrary pose.
pub fn play_motion_from(
    script: &MotionScript,
    start: JointAngles,
    t_ms: u64,
) -> Result<MotionSample, MotionError> {
    if script.frames.is_empty() {
        return Err(MotionError::MalformedScript("no frames".into()));
    }
    let mut from = start;
    let mut start = 0u64;
    for (i, f) in script.frames.iter().enumerate() {
        if f.duration_ms == 0 {
            return Err(MotionError::MalformedScript(format!(
                "frame {i} has zero duration"
            )));
        }
        let to = f.pose();
        let end = start + f.duration_ms;
        if t_ms < end {
            let a = (t_ms - start) as f64 / f.duration_ms as f64;
            return Ok(MotionSample {
                targets: from.zip_with(to, |x, y| x + (y - x) * a),
                support: f.support,
                frame: i,
            });
        }
        from = to;
        start = end;
    }
    let last = script.frames.len() - 1;
    Ok(MotionSample {
        targets: from,
        support: script.frames[last].support,
        frame: last,
    })
}
