use std::fmt::Write as _;
use std::path::Path;

use super::{ExperimentError, SweepReport, SweepRow, TrialRow};

pub fn write_trial_csv(rows: &[TrialRow], path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trial_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_report_csv(
    report: &SweepReport,
    path: impl AsRef<Path>,
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<SweepReport, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<SweepRow> = r.deserialize().collect::<Result<_, _>>()?;
    Ok(SweepReport { rows })
}

/// Table with one row per grid point, in the layout of a gain-effect table.
pub fn report_markdown(report: &SweepReport) -> String {
    let mut s = String::new();
    s.push_str("| Kp | Ki | Kd | Fall | Not Fall | Success | RMS Error |\n");
    s.push_str("|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "| {:.3} | {:.3} | {:.3} | {} | {} | {:.0}% | {:.4} |",
            r.kp, r.ki, r.kd, r.falls, r.not_falls, r.success_pct, r.rms_error
        );
    }
    s
}

pub fn write_report_markdown(
    report: &SweepReport,
    path: impl AsRef<Path>,
) -> Result<(), ExperimentError> {
    std::fs::write(path, report_markdown(report))?;
    Ok(())
}
