use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_trial, ExperimentError, Outcome, TrialConfig, TrialRecord};
use crate::control::PidGains;

/// Outcome counts and mean RMS error for one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub falls: usize,
    pub not_falls: usize,
    pub success_pct: f64,
    pub rms_error: f64,
}

impl SweepRow {
    pub fn gains(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
        }
    }

    pub fn from_trials(gains: PidGains, trials: &[TrialRecord]) -> Self {
        let falls = trials.iter().filter(|t| t.outcome == Outcome::Fall).count();
        let n = trials.len();
        let rms = trials.iter().map(|t| t.rms_error).sum::<f64>() / n.max(1) as f64;
        Self {
            kp: gains.kp,
            ki: gains.ki,
            kd: gains.kd,
            falls,
            not_falls: n - falls,
            success_pct: if n == 0 {
                0.0
            } else {
                100.0 * (n - falls) as f64 / n as f64
            },
            rms_error: rms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Grid points where every trial stayed up.
    pub fn perfect(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.falls == 0)
    }

    pub fn find(&self, gains: PidGains) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.gains() == gains)
    }
}

/// Runs `base.trials` trials at every grid point.
///
/// Every row uses the same trial seeds, so rows differ only in their gains.
/// Trials run in parallel; the report does not depend on scheduling.
pub fn run_sweep(grid: &[PidGains], base: &TrialConfig) -> Result<SweepReport, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::ConfigError("empty gain grid".into()));
    }
    base.validate()?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|r| (0..base.trials).map(move |t| (r, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(r, t)| {
            let config = TrialConfig {
                gains: grid[r],
                ..base.clone()
            };
            run_trial(&config, t)
        })
        .collect::<Result<_, _>>()?;
    let rows = records
        .chunks(base.trials)
        .zip(grid)
        .map(|(trials, g)| SweepRow::from_trials(*g, trials))
        .collect();
    Ok(SweepReport { rows })
}

fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
    PidGains { kp, ki, kd }
}

/// Proportional gain sweep with no integral or derivative action.
pub fn kp_grid() -> Vec<PidGains> {
    [0.0, 0.05, 0.10, 0.15, 0.20, 0.25]
        .into_iter()
        .map(|kp| gains(kp, 0.0, 0.0))
        .collect()
}

/// Integral gain sweep at `kp = 0.1`.
pub fn ki_grid() -> Vec<PidGains> {
    [0.01, 0.02, 0.04, 0.10, 0.20]
        .into_iter()
        .map(|ki| gains(0.1, ki, 0.0))
        .collect()
}

/// Derivative gain sweep at `kp = 0.1`.
pub fn kd_grid() -> Vec<PidGains> {
    [0.005, 0.01, 0.02, 0.05, 0.10]
        .into_iter()
        .map(|kd| gains(0.1, 0.0, kd))
        .collect()
}

/// All three sweeps in order.
pub fn bringup_grid() -> Vec<PidGains> {
    let mut g = kp_grid();
    g.extend(ki_grid());
    g.extend(kd_grid());
    g
}
