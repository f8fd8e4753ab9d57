use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use copbal::calibration::{
    fit_two_point, load_store, save_store, CalibrationCoefficients, CalibrationStore,
    CELLS_PER_FOOT, CELL_COUNT,
};
use copbal::control::PidGains;
use copbal::experiment::{
    bringup_grid, report_markdown, run_sweep, run_trial, write_report_csv, write_report_markdown,
    write_trial_csv, LiftSide, SweepReport, SweepRow, TrialConfig,
};
use copbal_live::{serve_live, LiveConfig, SimConfig};
use serde::Deserialize;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "copbal",
    version,
    about = "Center-of-pressure balance trials, sweeps and live service"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run foot-lift trials at one gain setting.
    Run {
        #[arg(long, default_value_t = 0.1)]
        kp: f64,
        #[arg(long, default_value_t = 0.0)]
        ki: f64,
        #[arg(long, default_value_t = 0.005)]
        kd: f64,
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every gain point in a JSON grid file.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep the standard Kp, Ki and Kd grids and list the points that hold every trial.
    Bringup {
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, default_value = "bringup")]
        out: PathBuf,
    },
    /// Serve the live simulation over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Calibration store used by save and load commands.
        #[arg(long, default_value = "calibration.copc")]
        store: PathBuf,
        /// Carry foot-unit packets over loopback UDP on this port.
        #[arg(long)]
        udp_port: Option<u16>,
        /// Wall time per 50 ms control tick.
        #[arg(long, default_value_t = 50)]
        tick_ms: u64,
    },
    /// Fit one cell from a tare and a loaded reading.
    Calibrate {
        /// Cell index, 0-3 left foot and 4-7 right foot.
        #[arg(long)]
        cell: usize,
        /// Averaged counts with no load.
        #[arg(long, allow_negative_numbers = true)]
        tare: f64,
        /// Averaged counts under the reference mass.
        #[arg(long, allow_negative_numbers = true)]
        loaded: f64,
        /// Reference mass in grams.
        #[arg(long, default_value_t = 50.0)]
        mass: f64,
        /// Store file to update; created with unit coefficients if missing.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct TrialArgs {
    /// Surface tilt magnitude, always toward the stance foot's outer edge.
    #[arg(long, default_value_t = 3.0)]
    tilt_deg: f64,
    /// Lifted foot: left, right or alternate.
    #[arg(long, default_value = "alternate")]
    foot: LiftSide,
    #[arg(long, default_value_t = 6)]
    trials: usize,
    /// Base seed; trial i uses seed + i. COP_SEED overrides it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Leave the balance controller off.
    #[arg(long)]
    no_control: bool,
    /// Packet loss probability of the simulated link.
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
}

impl TrialArgs {
    fn config(&self, gains: PidGains) -> Result<TrialConfig> {
        let mut config = TrialConfig {
            gains,
            tilt_deg: self.tilt_deg,
            foot: self.foot,
            trials: self.trials,
            seed: seed_override(self.seed)?,
            control_enabled: !self.no_control,
            ..TrialConfig::default()
        };
        config.channel.loss_prob = self.loss;
        config.validate()?;
        Ok(config)
    }
}

fn seed_override(seed: u64) -> Result<u64> {
    match std::env::var("COP_SEED") {
        Ok(v) => Ok(v
            .trim()
            .parse()
            .map_err(|e| format!("COP_SEED={v:?} is not a seed: {e}"))?),
        Err(_) => Ok(seed),
    }
}

#[derive(Deserialize)]
struct GridPoint {
    kp: f64,
    #[serde(default)]
    ki: f64,
    #[serde(default)]
    kd: f64,
}

fn zero() -> Vec<f64> {
    vec![0.0]
}

/// A list of points, or per-gain axes whose product is swept.
#[derive(Deserialize)]
#[serde(untagged)]
enum GridFile {
    Points(Vec<GridPoint>),
    Axes {
        kp: Vec<f64>,
        #[serde(default = "zero")]
        ki: Vec<f64>,
        #[serde(default = "zero")]
        kd: Vec<f64>,
    },
}

fn read_grid(path: &Path) -> Result<Vec<PidGains>> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let grid: GridFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let points: Vec<(f64, f64, f64)> = match grid {
        GridFile::Points(p) => p.into_iter().map(|g| (g.kp, g.ki, g.kd)).collect(),
        GridFile::Axes { kp, ki, kd } => {
            let mut points = Vec::new();
            for &p in &kp {
                for &i in &ki {
                    for &d in &kd {
                        points.push((p, i, d));
                    }
                }
            }
            points
        }
    };
    let gains = points
        .into_iter()
        .map(|(p, i, d)| PidGains::new(p, i, d))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if gains.is_empty() {
        return Err(format!("{}: grid is empty", path.display()).into());
    }
    Ok(gains)
}

fn write_reports(report: &SweepReport, out: &Path) -> Result<()> {
    write_report_csv(report, out.join("report.csv"))?;
    write_report_markdown(report, out.join("report.md"))?;
    Ok(())
}

fn run(gains: PidGains, args: &TrialArgs, out: &Path) -> Result<()> {
    let config = args.config(gains)?;
    fs::create_dir_all(out)?;
    let mut records = Vec::with_capacity(config.trials);
    for i in 0..config.trials {
        let r = run_trial(&config, i)?;
        write_trial_csv(&r.rows, out.join(format!("trial_{i}.csv")))?;
        println!(
            "trial {i}: seed {} lift {:?} tilt {:+.1} deg -> {:?}, rms {:.4}",
            r.seed, r.lifted, r.tilt_deg, r.outcome, r.rms_error
        );
        records.push(r);
    }
    let report = SweepReport {
        rows: vec![SweepRow::from_trials(gains, &records)],
    };
    write_reports(&report, out)?;
    print!("{}", report_markdown(&report));
    Ok(())
}

fn sweep(grid: &[PidGains], args: &TrialArgs, out: &Path) -> Result<SweepReport> {
    let config = args.config(PidGains::default())?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let report = run_sweep(grid, &config)?;
    write_reports(&report, out)?;
    print!("{}", report_markdown(&report));
    println!(
        "{} points x {} trials in {:.2?}",
        grid.len(),
        config.trials,
        start.elapsed()
    );
    Ok(report)
}

fn calibrate(cell: usize, tare: f64, loaded: f64, mass: f64, store: Option<&Path>) -> Result<()> {
    if cell >= CELL_COUNT {
        return Err(format!("cell {cell} outside 0..{CELL_COUNT}").into());
    }
    let c = fit_two_point((cell % CELLS_PER_FOOT) as u8, tare, loaded, mass)?;
    println!(
        "cell {cell}: gradient {:.9} g/count, offset {:.3} counts",
        c.gradient, c.offset_counts
    );
    if let Some(path) = store {
        let mut s = if path.exists() {
            load_store(path)?
        } else {
            CalibrationStore::from_cells(std::array::from_fn(|i| {
                CalibrationCoefficients::identity((i % CELLS_PER_FOOT) as u8)
            }))
        };
        s.set(cell, c);
        save_store(&s, path)?;
        println!("saved {}", path.display());
    }
    Ok(())
}

async fn serve(config: LiveConfig) -> Result<()> {
    let server = serve_live(config).await?;
    println!("serving on http://{} (ws at /ws)", server.local_addr());
    tokio::signal::ctrl_c().await?;
    server.shutdown().await?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run {
            kp,
            ki,
            kd,
            trial,
            out,
        } => PidGains::new(kp, ki, kd)
            .map_err(Into::into)
            .and_then(|g| run(g, &trial, &out)),
        Cmd::Sweep { grid, trial, out } => {
            read_grid(&grid).and_then(|g| sweep(&g, &trial, &out).map(|_| ()))
        }
        Cmd::Bringup { trial, out } => sweep(&bringup_grid(), &trial, &out).map(|report| {
            let perfect: Vec<_> = report.perfect().collect();
            if perfect.is_empty() {
                println!("no grid point held every trial");
            }
            for r in perfect {
                println!(
                    "holds every trial: Kp={} Ki={} Kd={} rms {:.4}",
                    r.kp, r.ki, r.kd, r.rms_error
                );
            }
        }),
        Cmd::Serve {
            port,
            host,
            seed,
            store,
            udp_port,
            tick_ms,
        } => seed_override(seed).and_then(|seed| {
            let config = LiveConfig {
                host,
                port,
                tick_interval: Duration::from_millis(tick_ms.max(1)),
                sim: SimConfig {
                    seed,
                    udp_port,
                    store_path: store,
                    ..SimConfig::default()
                },
            };
            tokio::runtime::Runtime::new()?.block_on(serve(config))
        }),
        Cmd::Calibrate {
            cell,
            tare,
            loaded,
            mass,
            store,
        } => calibrate(cell, tare, loaded, mass, store.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
