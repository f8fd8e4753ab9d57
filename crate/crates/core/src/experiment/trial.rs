use serde::{Deserialize, Serialize};

use super::{
    rms_error, Engine, EngineConfig, ExperimentError, PhaseSetpoints, TickSnapshot, Transport,
    TrialConfig, CONTROL_PERIOD_MS,
};
use crate::control::{capture_setpoint, PidGains};
use crate::cop::{CopEstimator, Foot, RobotCop};
use crate::plant::{MotionScript, PlantParams, Support};
use crate::telemetry::{Channel, ChannelModel};

const PLANT_SALT: u64 = 0x0070_6c61_6e74;
const CHANNEL_SALT: u64 = 0x6368_616e;
const REFERENCE_SALT: u64 = 0x7265_6600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Fall,
    NotFall,
}

/// One logged control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub t_ms: u64,
    pub cop_x: f64,
    pub cop_y: f64,
    pub theta_e: f64,
    pub torso: f64,
    pub hip: f64,
    pub ankle: f64,
    pub fallen: bool,
}

impl From<&TickSnapshot> for TrialRow {
    fn from(s: &TickSnapshot) -> Self {
        Self {
            t_ms: s.t_ms,
            cop_x: s.cop.x,
            cop_y: s.cop.y,
            theta_e: s.theta_e,
            torso: s.targets.torso,
            hip: s.targets.hip_l,
            ankle: s.targets.ankle_l,
            fallen: s.fallen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub lifted: Foot,
    /// Signed plant tilt used for this trial.
    pub tilt_deg: f64,
    pub gains: PidGains,
    pub setpoints: PhaseSetpoints,
    pub rows: Vec<TrialRow>,
    /// Support phase at each row.
    pub support: Vec<Support>,
    pub outcome: Outcome,
    /// RMS of the roll CoP error over the single-support rows.
    pub rms_error: f64,
}

impl TrialRecord {
    /// First row at which the fall was latched.
    pub fn fall_time_ms(&self) -> Option<u64> {
        self.rows.iter().find(|r| r.fallen).map(|r| r.t_ms)
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer so neighbouring trial seeds give unrelated streams
    let mut z = seed ^ salt;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn engine_for(
    config: &TrialConfig,
    plant: PlantParams,
    script: MotionScript,
    setpoints: PhaseSetpoints,
    control_enabled: bool,
    seed: u64,
) -> Result<Engine, ExperimentError> {
    let channel = config.channel.with_seed(mix(seed, CHANNEL_SALT));
    Engine::new(
        EngineConfig {
            plant,
            controller: config.controller,
            gains: config.gains,
            estimator: CopEstimator::default(),
            staleness_timeout_ms: config.staleness_timeout_ms,
            control_enabled,
        },
        script,
        setpoints,
        Transport::Sim(Channel::new(channel)),
    )
}

/// Steps until the script ends. A fallen robot keeps being logged lying down.
fn play(engine: &mut Engine) -> Vec<TickSnapshot> {
    let mut out = Vec::new();
    loop {
        let snap = engine.control_tick();
        out.push(snap);
        if engine.script_finished() {
            return out;
        }
        engine.advance();
    }
}

/// Phase setpoints from an uncontrolled run of the same script on flat ground
/// over a loss-free link.
///
/// For each support phase the longest frame that holds a fixed pose is used;
/// its second half is averaged so the lean has settled.
pub fn capture_reference_setpoints(
    config: &TrialConfig,
    script: &MotionScript,
    seed: u64,
) -> Result<PhaseSetpoints, ExperimentError> {
    let mut windows: Vec<(Support, u64, u64)> = Vec::new();
    let mut prev = crate::control::JointAngles::default();
    let mut start = 0;
    for f in &script.frames {
        let pose = f.pose();
        let end = start + f.duration_ms;
        if pose == prev {
            let from = start + f.duration_ms / 2;
            match windows.iter_mut().find(|(s, _, _)| *s == f.support) {
                Some(w) if w.2 - w.1 >= end - from => {}
                Some(w) => *w = (f.support, from, end),
                None => windows.push((f.support, from, end)),
            }
        }
        prev = pose;
        start = end;
    }
    if let Some(f) = script
        .frames
        .iter()
        .find(|f| f.support.is_single() && !windows.iter().any(|w| w.0 == f.support))
    {
        return Err(ExperimentError::ConfigError(format!(
            "script never holds a fixed pose in {:?} support",
            f.support
        )));
    }

    let seed = mix(seed, REFERENCE_SALT);
    // the reference is taken before the trial over a clean link
    let reference = TrialConfig {
        channel: ChannelModel {
            loss_prob: 0.0,
            ..config.channel
        },
        ..config.clone()
    };
    let plant = PlantParams {
        tilt_deg: 0.0,
        noise_seed: mix(seed, PLANT_SALT),
        ..config.plant
    };
    let mut engine = engine_for(
        &reference,
        plant,
        script.clone(),
        PhaseSetpoints::default(),
        false,
        seed,
    )?;
    let snaps = play(&mut engine);

    let mut setpoints = PhaseSetpoints::default();
    for (support, from, to) in windows {
        let window: Vec<RobotCop> = snaps
            .iter()
            .filter(|s| s.fresh && s.t_ms >= from && s.t_ms < to)
            .map(|s| s.cop)
            .collect();
        let captured = capture_setpoint(&window).map_err(|e| {
            ExperimentError::ConfigError(format!("setpoint capture for {support:?}: {e}"))
        })?;
        setpoints.set(support, captured);
    }
    Ok(setpoints)
}

/// Runs trial `index` of `config`.
pub fn run_trial(config: &TrialConfig, index: usize) -> Result<TrialRecord, ExperimentError> {
    config.validate()?;
    let seed = config.trial_seed(index);
    let lifted = config.foot.foot_for(index);
    let tilt_deg = config.plant_tilt(lifted);
    let plant = PlantParams {
        tilt_deg,
        noise_seed: mix(seed, PLANT_SALT),
        ..config.plant
    };
    let script = config.motion_script(lifted, &plant);
    let setpoints = match config.setpoints {
        Some(s) => s,
        None => capture_reference_setpoints(config, &script, seed)?,
    };

    let mut engine = engine_for(
        config,
        plant,
        script,
        setpoints,
        config.control_enabled,
        seed,
    )?;
    let snaps = play(&mut engine);
    debug_assert!(snaps
        .windows(2)
        .all(|w| w[1].t_ms - w[0].t_ms == CONTROL_PERIOD_MS));

    let rows: Vec<TrialRow> = snaps.iter().map(TrialRow::from).collect();
    let support: Vec<Support> = snaps.iter().map(|s| s.support).collect();
    let outcome = if snaps.iter().any(|s| s.fallen) {
        Outcome::Fall
    } else {
        Outcome::NotFall
    };
    let any_single = support.iter().any(|s| s.is_single());
    let errors: Vec<f64> = snaps
        .iter()
        .filter(|s| !any_single || s.support.is_single())
        .map(|s| s.cop.x - s.setpoint.x)
        .collect();
    Ok(TrialRecord {
        index,
        seed,
        lifted,
        tilt_deg,
        gains: config.gains,
        setpoints,
        rows,
        support,
        outcome,
        rms_error: rms_error(&errors, 0.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(mix(1, PLANT_SALT), mix(2, PLANT_SALT));
        assert_ne!(mix(1, PLANT_SALT), mix(1, CHANNEL_SALT));
    }

    #[test]
    fn stand_on_flat_ground_never_falls() {
        let config = TrialConfig {
            tilt_deg: 0.0,
            script: super::super::ScriptKind::Stand { duration_ms: 3000 },
            ..TrialConfig::default()
        };
        let r = run_trial(&config, 0).unwrap();
        assert_eq!(r.outcome, Outcome::NotFall);
        assert_eq!(r.rows.len(), 61);
        assert!(r.rms_error < 0.05, "{}", r.rms_error);
    }
}
