use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::calibration::{CELLS_PER_FOOT, CELL_COUNT};
use crate::control::{
    BalanceController, ControlInput, ControlOutput, ControllerConfig, JointAngles, PidGains,
    Setpoints,
};
use crate::cop::{CopEstimator, Foot, RobotCop};
use crate::plant::{
    pad_forces_ideal, play_motion_from, MotionSample, MotionScript, Plant, PlantParams, Support,
    PHYSICS_DT_MS,
};
use crate::telemetry::{
    decode, encode, Channel, Receiver, TelemetryPacket, UdpLink, SAMPLE_PERIOD_MS,
};

pub const CONTROL_PERIOD_MS: u64 = 50;
/// Foot units sample 10 ms ahead of the control tick so a packet with
/// nominal latency is in by the time the controller reads.
pub const FOOT_SAMPLE_PHASE_MS: u64 = 40;

const SUBSTEPS: u64 = CONTROL_PERIOD_MS / PHYSICS_DT_MS;
const TARE_SAMPLES: usize = 256;

/// Setpoint for each support phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSetpoints {
    pub double: Setpoints,
    pub left_stance: Setpoints,
    pub right_stance: Setpoints,
}

impl Default for PhaseSetpoints {
    fn default() -> Self {
        Self {
            double: Setpoints { x: 0.0, y: 0.0 },
            left_stance: Setpoints { x: -1.0, y: 0.0 },
            right_stance: Setpoints { x: 1.0, y: 0.0 },
        }
    }
}

impl PhaseSetpoints {
    pub fn get(&self, support: Support) -> Setpoints {
        match support {
            Support::Double => self.double,
            Support::LeftOnly => self.left_stance,
            Support::RightOnly => self.right_stance,
        }
    }

    pub fn set(&mut self, support: Support, setpoints: Setpoints) {
        match support {
            Support::Double => self.double = setpoints,
            Support::LeftOnly => self.left_stance = setpoints,
            Support::RightOnly => self.right_stance = setpoints,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub gains: PidGains,
    pub estimator: CopEstimator,
    pub staleness_timeout_ms: u64,
    pub control_enabled: bool,
}

/// How foot-unit packets reach the controller.
// one per engine, so the size gap costs nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug)]
pub enum Transport {
    /// Simulated lossy link on the simulation clock.
    Sim(Channel),
    /// Real datagrams over loopback.
    Udp(UdpLink),
}

/// What the controller saw and did on one control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickSnapshot {
    pub t_ms: u64,
    pub cop: RobotCop,
    /// Both feet reported within the staleness timeout.
    pub fresh: bool,
    /// Last received per-cell masses, left foot first.
    pub cells_g: [f64; CELL_COUNT],
    pub theta_e: f64,
    pub targets: JointAngles,
    pub joints: JointAngles,
    pub support: Support,
    pub setpoint: Setpoints,
    pub frozen: bool,
    pub fallen: bool,
}

/// Plant, foot units, link and controller on one clock.
///
/// [`Engine::tick`] runs a control update and then 50 ms of physics. Foot
/// units sample at `t % 50 == 40` and the controller reads at `t % 50 == 0`.
#[derive(Debug)]
pub struct Engine {
    config: EngineConfig,
    plant: Plant,
    transport: Transport,
    receiver: Receiver,
    controller: BalanceController,
    script: MotionScript,
    script_start_ms: u64,
    script_from: JointAngles,
    setpoints: PhaseSetpoints,
    seq: [u16; 2],
    last_cop: RobotCop,
    last_output: Option<ControlOutput>,
    decode_errors: u64,
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        script: MotionScript,
        setpoints: PhaseSetpoints,
        transport: Transport,
    ) -> Result<Self, ExperimentError> {
        config
            .plant
            .validate()
            .map_err(ExperimentError::ConfigError)?;
        script.validate(&config.controller.limits)?;
        let mut controller = BalanceController::new(config.gains, config.controller);
        controller.set_enabled(config.control_enabled);
        Ok(Self {
            plant: Plant::new(config.plant),
            receiver: Receiver::new(config.staleness_timeout_ms),
            controller,
            transport,
            script,
            script_start_ms: 0,
            script_from: JointAngles::default(),
            setpoints,
            seq: [0; 2],
            last_cop: RobotCop::default(),
            last_output: None,
            decode_errors: 0,
            config,
        })
    }

    pub fn t_ms(&self) -> u64 {
        self.plant.state.t_ms
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn plant_mut(&mut self) -> &mut Plant {
        &mut self.plant
    }

    pub fn controller(&self) -> &BalanceController {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut BalanceController {
        &mut self.controller
    }

    pub fn receiver(&self) -> &Receiver {
        &self.receiver
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut Transport {
        &mut self.transport
    }

    /// Controller output of the most recent control tick.
    pub fn last_output(&self) -> Option<&ControlOutput> {
        self.last_output.as_ref()
    }

    pub fn setpoints(&self) -> &PhaseSetpoints {
        &self.setpoints
    }

    pub fn setpoints_mut(&mut self) -> &mut PhaseSetpoints {
        &mut self.setpoints
    }

    pub fn decode_errors(&self) -> u64 {
        self.decode_errors
    }

    pub fn script(&self) -> &MotionScript {
        &self.script
    }

    /// Whether the current script has played to its end.
    pub fn script_finished(&self) -> bool {
        self.t_ms() >= self.script_start_ms + self.script.duration_ms()
    }

    /// Starts `script` now, interpolating from the current script pose.
    pub fn set_script(&mut self, script: MotionScript) -> Result<(), ExperimentError> {
        script.validate(&self.config.controller.limits)?;
        self.script_from = self.script_sample().targets;
        self.script = script;
        self.script_start_ms = self.t_ms();
        Ok(())
    }

    /// Back to an upright robot at rest, keeping the clock, link and
    /// calibration. The controller forgets its correction.
    pub fn reset_plant(&mut self) {
        let t = self.t_ms();
        let support = self.plant.state.support;
        self.plant.state = Default::default();
        self.plant.state.t_ms = t;
        self.plant.state.support = support;
        self.controller.reset();
        self.last_output = None;
        self.script_from = JointAngles::default();
    }

    /// Re-zeroes one cell under its present load.
    pub fn tare(&mut self, cell: usize) {
        let load = pad_forces_ideal(&self.plant.state, &self.plant.params)[cell];
        self.plant.sensors.tare(cell, load, TARE_SAMPLES);
    }

    fn script_sample(&self) -> MotionSample {
        let t = self.t_ms().saturating_sub(self.script_start_ms);
        play_motion_from(&self.script, self.script_from, t).expect("script validated on load")
    }

    /// Reads the receiver and runs the controller for the current time.
    pub fn control_tick(&mut self) -> TickSnapshot {
        let t = self.t_ms();
        self.deliver(t);
        let motion = self.script_sample();
        self.plant.set_support(motion.support);

        let (fresh, cells) = match self.receiver.poll(t) {
            Ok(poll) => {
                self.last_cop = self.config.estimator.robot_cop(&poll.left.0, &poll.right.0);
                let mut cells = [0.0; CELL_COUNT];
                cells[..CELLS_PER_FOOT].copy_from_slice(&poll.left.0.per_cell);
                cells[CELLS_PER_FOOT..].copy_from_slice(&poll.right.0.per_cell);
                (poll.all_fresh(), cells)
            }
            Err(_) => (false, [0.0; CELL_COUNT]),
        };

        let setpoint = self.setpoints.get(motion.support);
        self.controller.set_setpoints(setpoint);
        let out = self.controller.step(
            ControlInput {
                cop: self.last_cop,
                fresh,
            },
            &motion.targets,
        );
        self.last_output = Some(out);
        TickSnapshot {
            t_ms: t,
            cop: self.last_cop,
            fresh,
            cells_g: cells,
            theta_e: out.theta_e_roll,
            targets: self.controller.joint_targets(&motion.targets),
            joints: self.plant.state.joint_angles_deg,
            support: motion.support,
            setpoint,
            frozen: out.frozen,
            fallen: self.plant.state.fallen,
        }
    }

    /// Runs one control period of physics, sampling the foot units on the way.
    pub fn advance(&mut self) {
        for _ in 0..SUBSTEPS {
            let t = self.t_ms();
            let motion = self.script_sample();
            self.plant.set_support(motion.support);
            if t % SAMPLE_PERIOD_MS == FOOT_SAMPLE_PHASE_MS {
                self.sample_feet(t);
            }
            self.deliver(t);
            let commands = self.controller.joint_targets(&motion.targets);
            self.plant.step(&commands);
        }
    }

    /// Control update followed by one period of physics.
    pub fn tick(&mut self) -> TickSnapshot {
        let snap = self.control_tick();
        self.advance();
        snap
    }

    fn sample_feet(&mut self, t: u64) {
        let masses = self.plant.pad_forces();
        for foot in Foot::BOTH {
            let i = foot.index();
            let mut cells = [0.0; CELLS_PER_FOOT];
            cells.copy_from_slice(&masses[i * CELLS_PER_FOOT..(i + 1) * CELLS_PER_FOOT]);
            let sample = self.config.estimator.foot_cop(foot, cells, t as u32);
            let packet = TelemetryPacket {
                seq: self.seq[i],
                sample,
            };
            self.seq[i] = self.seq[i].wrapping_add(1);
            let Ok(bytes) = encode(&packet) else {
                // a reading the wire format cannot carry is dropped at the source
                continue;
            };
            match &mut self.transport {
                Transport::Sim(ch) => ch.submit(bytes.to_vec(), t),
                Transport::Udp(link) => {
                    // a full socket buffer is the same as a lost datagram
                    let _ = link.send(&bytes);
                }
            }
        }
    }

    fn deliver(&mut self, t: u64) {
        let datagrams: Vec<Vec<u8>> = match &mut self.transport {
            Transport::Sim(ch) => ch.step(t).into_iter().map(|d| d.bytes).collect(),
            Transport::Udp(link) => link.drain().unwrap_or_default(),
        };
        for bytes in datagrams {
            match decode(&bytes) {
                Ok(packet) => {
                    self.receiver.accept(&packet, t);
                }
                Err(_) => self.decode_errors += 1,
            }
        }
    }
}
