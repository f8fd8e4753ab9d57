use std::time::{Duration, Instant};

use copbal::control::{JointAngles, PidGains};
use copbal::experiment::{
    kp_grid, read_report_csv, read_trial_csv, report_markdown, rms_error, run_sweep, run_trial,
    write_report_csv, write_trial_csv, ExperimentError, LiftSide, Outcome, ScriptKind, TrialConfig,
    TrialRecord,
};
use copbal::plant::{MotionFrame, MotionScript, Support};
use copbal::telemetry::ChannelModel;
use proptest::prelude::*;

fn config(kp: f64, ki: f64, kd: f64) -> TrialConfig {
    TrialConfig {
        gains: PidGains::new(kp, ki, kd).unwrap(),
        ..TrialConfig::default()
    }
}

#[test]
fn uncontrolled_right_lift_falls() {
    let c = TrialConfig {
        control_enabled: false,
        foot: LiftSide::Right,
        ..TrialConfig::default()
    };
    let r = run_trial(&c, 0).unwrap();
    assert_eq!(r.outcome, Outcome::Fall);
    assert!(r.tilt_deg < 0.0);
    // it tips outward over the left foot
    let last = r.rows.last().unwrap();
    assert!(last.fallen && last.cop_x < -1.9, "{last:?}");
}

#[test]
fn standing_on_flat_ground_never_falls() {
    for gains in [(0.0, 0.0, 0.0), (0.1, 0.0, 0.005), (0.25, 0.2, 0.0)] {
        let c = TrialConfig {
            tilt_deg: 0.0,
            script: ScriptKind::Stand { duration_ms: 4000 },
            ..config(gains.0, gains.1, gains.2)
        };
        for i in 0..2 {
            assert_eq!(
                run_trial(&c, i).unwrap().outcome,
                Outcome::NotFall,
                "{gains:?}"
            );
        }
    }
}

#[test]
fn tuned_gains_hold_every_trial() {
    let c = config(0.1, 0.0, 0.005);
    for i in 0..c.trials {
        let r = run_trial(&c, i).unwrap();
        assert_eq!(r.outcome, Outcome::NotFall, "trial {i}");
        assert_eq!(r.rows.len(), 121);
    }
}

#[test]
fn rms_uses_the_single_support_window() {
    let r = run_trial(&config(0.1, 0.0, 0.005), 1).unwrap();
    let errs: Vec<f64> = r
        .rows
        .iter()
        .zip(&r.support)
        .filter(|(_, s)| s.is_single())
        .map(|(row, s)| row.cop_x - r.setpoints.get(*s).x)
        .collect();
    assert_eq!(errs.len(), 60);
    assert_eq!(r.rms_error, rms_error(&errs, 0.0).unwrap());
}

#[test]
fn same_seed_gives_byte_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let c = TrialConfig {
        channel: ChannelModel {
            loss_prob: 0.2,
            reorder: true,
            latency_jitter_ms: 30,
            ..ChannelModel::default()
        },
        ..config(0.1, 0.02, 0.01)
    };
    let mut bytes = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("trial_{run}.csv"));
        write_trial_csv(&run_trial(&c, 3).unwrap().rows, &path).unwrap();
        bytes.push(std::fs::read(path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);

    let grid = vec![
        PidGains::p(0.0),
        PidGains::p(0.1),
        PidGains::new(0.1, 0.0, 0.1).unwrap(),
    ];
    let mut reports = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("report_{run}.csv"));
        write_report_csv(&run_sweep(&grid, &c).unwrap(), &path).unwrap();
        reports.push(std::fs::read(path).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let other = TrialConfig {
        seed: 2,
        ..c.clone()
    };
    assert_ne!(
        run_trial(&c, 0).unwrap().rows,
        run_trial(&other, 0).unwrap().rows
    );
}

#[test]
fn exports_re_parse_to_equal_records() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_trial(&config(0.15, 0.0, 0.0), 0).unwrap();
    let path = dir.path().join("trial_0.csv");
    write_trial_csv(&r.rows, &path).unwrap();
    assert_eq!(read_trial_csv(&path).unwrap(), r.rows);
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("t_ms,cop_x,cop_y,theta_e,torso,hip,ankle,fallen\n"));

    let json = serde_json::to_string(&r).unwrap();
    let back: TrialRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);

    let report = run_sweep(
        &[PidGains::p(0.05), PidGains::p(0.2)],
        &TrialConfig {
            trials: 2,
            ..TrialConfig::default()
        },
    )
    .unwrap();
    let path = dir.path().join("report.csv");
    write_report_csv(&report, &path).unwrap();
    assert_eq!(read_report_csv(&path).unwrap(), report);
    assert!(report_markdown(&report).contains("| Fall | Not Fall | Success | RMS Error |"));
}

#[test]
fn singleton_sweep_matches_individual_trials() {
    let c = TrialConfig {
        trials: 4,
        ..config(0.05, 0.0, 0.02)
    };
    let report = run_sweep(&[c.gains], &c).unwrap();
    let trials: Vec<_> = (0..4).map(|i| run_trial(&c, i).unwrap()).collect();
    let row = &report.rows[0];
    let falls = trials.iter().filter(|t| t.outcome == Outcome::Fall).count();
    assert_eq!(row.falls, falls);
    let mean = trials.iter().map(|t| t.rms_error).sum::<f64>() / 4.0;
    assert_eq!(row.rms_error, mean);
}

#[test]
fn sweep_accounting_and_zero_gain_row() {
    let c = TrialConfig {
        trials: 3,
        ..TrialConfig::default()
    };
    let report = run_sweep(&kp_grid(), &c).unwrap();
    assert_eq!(report.rows.len(), 6);
    for row in &report.rows {
        assert_eq!(row.falls + row.not_falls, 3);
        assert_eq!(row.success_pct, 100.0 * row.not_falls as f64 / 3.0);
    }
    assert_eq!(report.rows[0].success_pct, 0.0);
}

#[test]
fn table_two_grid_runs_within_budget() {
    let start = Instant::now();
    run_sweep(&kp_grid(), &TrialConfig::default()).unwrap();
    assert!(
        start.elapsed() < Duration::from_secs(60),
        "{:?}",
        start.elapsed()
    );
}

#[test]
fn packet_loss_never_helps() {
    // one-sided two-proportion test at 95%: loss may not raise the success rate
    let n = 50;
    let success = |loss: f64| {
        let c = TrialConfig {
            trials: n,
            channel: ChannelModel {
                loss_prob: loss,
                ..ChannelModel::default()
            },
            ..config(0.1, 0.0, 0.02)
        };
        let report = run_sweep(&[c.gains], &c).unwrap();
        report.rows[0].not_falls as f64 / n as f64
    };
    let clean = success(0.0);
    let lossy = success(0.5);
    let pooled = (clean + lossy) / 2.0;
    let se = (pooled * (1.0 - pooled) * 2.0 / n as f64).sqrt();
    let z = if se > 0.0 { (lossy - clean) / se } else { 0.0 };
    assert!(z < 1.645, "clean {clean} lossy {lossy} z {z}");
}

#[test]
fn bad_configs_are_rejected() {
    let zero = TrialConfig {
        trials: 0,
        ..TrialConfig::default()
    };
    assert!(matches!(
        run_trial(&zero, 0),
        Err(ExperimentError::ConfigError(_))
    ));
    assert!(matches!(
        run_sweep(&[], &TrialConfig::default()),
        Err(ExperimentError::ConfigError(_))
    ));
    // single support that never holds a pose leaves nothing to capture a setpoint from
    let ramp = MotionScript::new(vec![
        MotionFrame::new(JointAngles::default(), 500, Support::Double),
        MotionFrame::new(JointAngles::from_array([2.0; 5]), 1000, Support::LeftOnly),
    ])
    .unwrap();
    let moving = TrialConfig {
        script: ScriptKind::Custom { script: ramp },
        ..TrialConfig::default()
    };
    assert!(matches!(
        run_trial(&moving, 0),
        Err(ExperimentError::ConfigError(_))
    ));
    let nan_tilt = TrialConfig {
        tilt_deg: f64::NAN,
        ..TrialConfig::default()
    };
    assert!(matches!(
        run_trial(&nan_tilt, 0),
        Err(ExperimentError::ConfigError(_))
    ));
}

proptest! {
    #[test]
    fn rms_matches_two_pass_oracle(
        series in proptest::collection::vec(-3.0f64..3.0, 1..500),
        setpoint in -2.0f64..2.0,
    ) {
        let n = series.len() as f64;
        let deviations: Vec<f64> = series.iter().map(|x| x - setpoint).collect();
        let mean_sq = deviations.iter().map(|d| d * d).sum::<f64>() / n;
        let oracle = mean_sq.sqrt();
        let got = rms_error(&series, setpoint).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }
}
