//! Center-of-pressure roll balance for a small humanoid.
//!
//! Load-cell calibration, per-foot CoP estimation, the foot-unit telemetry
//! link, the PID roll controller, a simulated plant to run it against, and
//! the trial/sweep harness on top.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod control;
pub mod cop;
pub mod experiment;
pub mod plant;
pub mod telemetry;
