use std::path::PathBuf;

use copbal::cop::Foot;
use copbal::plant::Support;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Console commands. Over HTTP each is `POST /api/<command>` with the
/// variant's fields as the JSON body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Gains {
        kp: f64,
        ki: f64,
        kd: f64,
    },
    Setpoint {
        support: Support,
        x: f64,
        y: f64,
    },
    Tare {
        cell: usize,
    },
    Calibration {
        cell: usize,
        gradient: f64,
        offset_counts: f64,
    },
    SaveStore {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    LoadStore {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    StartTrial {
        foot: Foot,
        #[serde(default = "yes")]
        control: bool,
        /// Tilt magnitude toward the stance foot's outer edge. Unset keeps
        /// the current tilt.
        #[serde(default)]
        tilt_deg: Option<f64>,
    },
    StopTrial,
    Tilt {
        deg: f64,
    },
    LiftFoot {
        foot: Foot,
    },
    LowerFoot,
    Control {
        enabled: bool,
    },
    Reset,
}

fn yes() -> bool {
    true
}

pub const COMMAND_NAMES: [&str; 13] = [
    "gains",
    "setpoint",
    "tare",
    "calibration",
    "save_store",
    "load_store",
    "start_trial",
    "stop_trial",
    "tilt",
    "lift_foot",
    "lower_foot",
    "control",
    "reset",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("unknown command {0:?}")]
    Unknown(String),
    #[error("malformed command: {0}")]
    Malformed(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Conflict(String),
    #[error("calibration store: {0}")]
    Store(String),
    #[error("simulation is not running")]
    Stopped,
}

impl CommandError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Unknown(_) => "unknown_command",
            Self::Malformed(_) => "malformed",
            Self::Invalid(_) => "invalid_value",
            Self::Conflict(_) => "conflict",
            Self::Store(_) => "store_error",
            Self::Stopped => "stopped",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            Self::Unknown(_) => 404,
            Self::Malformed(_) => 400,
            Self::Invalid(_) => 422,
            Self::Conflict(_) => 409,
            Self::Store(_) => 500,
            Self::Stopped => 503,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "ok": false,
            "error": { "code": self.code(), "message": self.to_string() },
        })
    }
}

impl Command {
    /// Parses the body sent to `POST /api/<name>`. An empty body is `{}`.
    pub fn parse(name: &str, body: &[u8]) -> Result<Self, CommandError> {
        if !COMMAND_NAMES.contains(&name) {
            return Err(CommandError::Unknown(name.to_string()));
        }
        let mut fields: Map<String, Value> = if body.iter().all(u8::is_ascii_whitespace) {
            Map::new()
        } else {
            serde_json::from_slice(body).map_err(|e| CommandError::Malformed(e.to_string()))?
        };
        fields.insert("command".into(), Value::String(name.into()));
        serde_json::from_value(Value::Object(fields))
            .map_err(|e| CommandError::Malformed(e.to_string()))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gains { .. } => "gains",
            Self::Setpoint { .. } => "setpoint",
            Self::Tare { .. } => "tare",
            Self::Calibration { .. } => "calibration",
            Self::SaveStore { .. } => "save_store",
            Self::LoadStore { .. } => "load_store",
            Self::StartTrial { .. } => "start_trial",
            Self::StopTrial => "stop_trial",
            Self::Tilt { .. } => "tilt",
            Self::LiftFoot { .. } => "lift_foot",
            Self::LowerFoot => "lower_foot",
            Self::Control { .. } => "control",
            Self::Reset => "reset",
        }
    }
}
