//! Load-cell calibration.
//!
//! Raw ADC counts are mapped to grams with a two-point line: the tare reading
//! fixes the offset and a single reference mass fixes the gradient.
//!
//! ```text
//! grams = gradient * (counts - offset_counts)
//! ```
//!
//! The five-mass reference set is only used to characterize the residual error
//! of a fitted cell, never as fit input.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Load cells per foot.
pub const CELLS_PER_FOOT: usize = 4;
/// Load cells on the whole robot (two feet).
pub const CELL_COUNT: usize = 2 * CELLS_PER_FOOT;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("degenerate calibration: tare={tare} loaded={loaded} reference={reference_g} g")]
    DegenerateCalibration {
        tare: f64,
        loaded: f64,
        reference_g: f64,
    },
    #[error("calibration store is corrupt: {0}")]
    CorruptStore(String),
    #[error("calibration store version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("invalid reference mass set: {0}")]
    InvalidReferenceSet(String),
    #[error("calibration store i/o failed: {0}")]
    IoFailure(#[from] io::Error),
}

/// One reading from a load cell ADC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSample {
    /// Cell index within its foot, `0..4`.
    pub cell_id: u8,
    pub counts: i32,
    pub timestamp_ms: u64,
}

/// Linear map from counts to grams for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCoefficients {
    pub cell_id: u8,
    /// Grams per count. Always positive for a valid calibration.
    pub gradient: f64,
    /// Counts at zero load.
    pub offset_counts: f64,
}

impl CalibrationCoefficients {
    pub fn new(cell_id: u8, gradient: f64, offset_counts: f64) -> Self {
        Self {
            cell_id,
            gradient,
            offset_counts,
        }
    }

    /// Unit gradient, zero offset.
    pub fn identity(cell_id: u8) -> Self {
        Self::new(cell_id, 1.0, 0.0)
    }

    /// Applies the line to a (possibly averaged) count value.
    pub fn grams(&self, counts: f64) -> f64 {
        self.gradient * (counts - self.offset_counts)
    }

    /// Inverse of [`Self::grams`].
    pub fn counts_for(&self, grams: f64) -> f64 {
        grams / self.gradient + self.offset_counts
    }
}

/// Fits a cell from a tare reading and a reading under one reference mass.
///
/// Readings are reals so averaged ADC values can be used directly.
pub fn fit_two_point(
    cell_id: u8,
    tare_raw: f64,
    loaded_raw: f64,
    reference_mass_g: f64,
) -> Result<CalibrationCoefficients, CalibrationError> {
    let degenerate = || CalibrationError::DegenerateCalibration {
        tare: tare_raw,
        loaded: loaded_raw,
        reference_g: reference_mass_g,
    };
    if !(reference_mass_g > 0.0) || !tare_raw.is_finite() || !loaded_raw.is_finite() {
        return Err(degenerate());
    }
    if loaded_raw == tare_raw {
        return Err(degenerate());
    }
    let gradient = reference_mass_g / (loaded_raw - tare_raw);
    if !(gradient > 0.0) || !gradient.is_finite() {
        // inverted wiring shows up as a negative slope
        return Err(degenerate());
    }
    Ok(CalibrationCoefficients::new(cell_id, gradient, tare_raw))
}

/// Converts a raw sample to grams. Not clamped: noise can make this slightly negative.
pub fn estimate_mass(raw: &RawSample, coeffs: &CalibrationCoefficients) -> f64 {
    debug_assert_eq!(raw.cell_id, coeffs.cell_id, "coefficients for another cell");
    coeffs.grams(f64::from(raw.counts))
}

/// Ordered reference masses used to characterize a calibrated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMassSet {
    masses_g: Vec<f64>,
}

impl ReferenceMassSet {
    pub fn new(masses_g: Vec<f64>) -> Result<Self, CalibrationError> {
        if masses_g.is_empty() {
            return Err(CalibrationError::InvalidReferenceSet("empty".into()));
        }
        if masses_g.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(CalibrationError::InvalidReferenceSet(
                "masses must be positive".into(),
            ));
        }
        if masses_g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CalibrationError::InvalidReferenceSet(
                "masses must be strictly increasing".into(),
            ));
        }
        Ok(Self { masses_g })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses_g
    }

    /// The smallest mass, used as the calibration point.
    pub fn smallest(&self) -> f64 {
        self.masses_g[0]
    }
}

impl Default for ReferenceMassSet {
    fn default() -> Self {
        Self {
            masses_g: vec![50.0, 100.0, 200.0, 500.0, 1000.0],
        }
    }
}

// ---------------------------------------------------------------------------
// Persistent store
// ---------------------------------------------------------------------------

pub const STORE_MAGIC: &[u8; 4] = b"COPC";
pub const STORE_VERSION: u8 = 1;
const RECORD_LEN: usize = 1 + 8 + 8;
/// Total size of a serialized store in bytes.
pub const STORE_LEN: usize = 4 + 1 + CELL_COUNT * RECORD_LEN + 4;

const STORE_CRC: crc::Crc<u32> = crc::Crc::<u32>::new(&crc::CRC_32_ISO_HDLC);

/// Coefficients for all eight cells, left foot first.
///
/// On disk each record carries the global cell index `foot * 4 + cell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStore {
    cells: [CalibrationCoefficients; CELL_COUNT],
}

impl Default for CalibrationStore {
    fn default() -> Self {
        Self {
            cells: std::array::from_fn(|i| {
                CalibrationCoefficients::identity((i % CELLS_PER_FOOT) as u8)
            }),
        }
    }
}

impl CalibrationStore {
    pub fn from_cells(cells: [CalibrationCoefficients; CELL_COUNT]) -> Self {
        Self { cells }
    }

    /// Coefficients by global index `0..8`.
    pub fn get(&self, index: usize) -> &CalibrationCoefficients {
        &self.cells[index]
    }

    pub fn set(&mut self, index: usize, coeffs: CalibrationCoefficients) {
        let mut coeffs = coeffs;
        coeffs.cell_id = (index % CELLS_PER_FOOT) as u8;
        self.cells[index] = coeffs;
    }

    pub fn cells(&self) -> &[CalibrationCoefficients; CELL_COUNT] {
        &self.cells
    }

    /// Serializes to the versioned binary layout with a CRC-32 trailer.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(STORE_LEN);
        out.extend_from_slice(STORE_MAGIC);
        out.push(STORE_VERSION);
        for (i, c) in self.cells.iter().enumerate() {
            out.push(i as u8);
            out.extend_from_slice(&c.gradient.to_le_bytes());
            out.extend_from_slice(&c.offset_counts.to_le_bytes());
        }
        let crc = STORE_CRC.checksum(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CalibrationError> {
        if bytes.len() != STORE_LEN {
            return Err(CalibrationError::CorruptStore(format!(
                "expected {STORE_LEN} bytes, found {}",
                bytes.len()
            )));
        }
        let (body, trailer) = bytes.split_at(STORE_LEN - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
        if STORE_CRC.checksum(body) != stored {
            return Err(CalibrationError::CorruptStore("checksum mismatch".into()));
        }
        if &body[..4] != STORE_MAGIC {
            return Err(CalibrationError::CorruptStore("bad magic".into()));
        }
        if body[4] != STORE_VERSION {
            return Err(CalibrationError::VersionMismatch {
                found: body[4],
                expected: STORE_VERSION,
            });
        }
        let mut cells = [CalibrationCoefficients::identity(0); CELL_COUNT];
        for (i, record) in body[5..].chunks_exact(RECORD_LEN).enumerate() {
            if usize::from(record[0]) != i {
                return Err(CalibrationError::CorruptStore(format!(
                    "record {i} carries cell index {}",
                    record[0]
                )));
            }
            let gradient = f64::from_le_bytes(record[1..9].try_into().expect("8 bytes"));
            let offset = f64::from_le_bytes(record[9..17].try_into().expect("8 bytes"));
            cells[i] = CalibrationCoefficients::new((i % CELLS_PER_FOOT) as u8, gradient, offset);
        }
        Ok(Self { cells })
    }
}

pub fn save_store(
    store: &CalibrationStore,
    path: impl AsRef<Path>,
) -> Result<(), CalibrationError> {
    fs::write(path, store.to_bytes())?;
    Ok(())
}

pub fn load_store(path: impl AsRef<Path>) -> Result<CalibrationStore, CalibrationError> {
    let bytes = fs::read(path)?;
    CalibrationStore::from_bytes(&bytes)
}

// ---------------------------------------------------------------------------
// Simulated sensor
// ---------------------------------------------------------------------------

/// Noise parameters shared by every simulated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-sample additive Gaussian noise, grams.
    pub sigma_g: f64,
    /// Bound on the per-cell fixed error at 1000 g, as a fraction of 1000 g.
    pub max_gain_error: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_g: 5.0,
            max_gain_error: 0.02,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma_g: 0.0,
            max_gain_error: 0.0,
        }
    }
}

/// The "true" transfer function of one physical cell.
///
/// The cell reports `m + k * m^2 / 1000` grams worth of counts, so the error
/// grows with load and cannot be removed by a two-point line through 0 g and
/// a light reference mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedCell {
    pub cell_id: u8,
    pub true_gradient: f64,
    pub true_offset_counts: f64,
    /// Fractional deviation at 1000 g (`k` above).
    pub gain_error: f64,
    pub sigma_g: f64,
}

impl SimulatedCell {
    /// Draws a cell with a plausible HX711-style line and an error within `noise`.
    pub fn random(cell_id: u8, noise: &NoiseModel, rng: &mut impl Rng) -> Self {
        let gain_error = if noise.max_gain_error > 0.0 {
            rng.random_range(-noise.max_gain_error..=noise.max_gain_error)
        } else {
            0.0
        };
        Self {
            cell_id,
            true_gradient: rng.random_range(0.018..0.024),
            true_offset_counts: rng.random_range(-60_000.0..60_000.0_f64).round(),
            gain_error,
            sigma_g: noise.sigma_g,
        }
    }

    /// Apparent load seen by the strain gauge, before noise.
    pub fn apparent_grams(&self, grams: f64) -> f64 {
        grams + self.gain_error * grams * grams / 1000.0
    }

    /// One noisy ADC reading of `grams`.
    pub fn read(&self, grams: f64, timestamp_ms: u64, rng: &mut impl Rng) -> RawSample {
        let noise = gaussian(self.sigma_g, rng);
        let counts =
            self.true_offset_counts + (self.apparent_grams(grams) + noise) / self.true_gradient;
        RawSample {
            cell_id: self.cell_id,
            counts: counts
                .round()
                .clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32,
            timestamp_ms,
        }
    }

    /// Mean of `n` readings, in counts.
    pub fn read_average(&self, grams: f64, n: usize, rng: &mut impl Rng) -> f64 {
        let n = n.max(1);
        let sum: f64 = (0..n)
            .map(|_| f64::from(self.read(grams, 0, rng).counts))
            .sum();
        sum / n as f64
    }

    /// Error left after a perfect two-point calibration at `reference_g`.
    pub fn residual_after_fit(&self, grams: f64, reference_g: f64) -> f64 {
        self.gain_error * grams * (grams - reference_g) / 1000.0
    }
}

fn gaussian(sigma: f64, rng: &mut impl Rng) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// Readings of one cell against the reference masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationRow {
    pub cell_id: u8,
    pub coefficients: CalibrationCoefficients,
    /// `(reference, reading)` pairs in grams.
    pub readings: Vec<(f64, f64)>,
    /// Signed reading minus reference with the largest magnitude.
    pub max_error_g: f64,
}

/// Readings averaged per calibration or reference point.
pub const DEFAULT_SAMPLES_PER_POINT: usize = 4096;

/// Calibrates `cell` at tare plus the smallest reference mass, then reads every
/// reference mass back through the fitted line.
pub fn characterize(
    cell: &SimulatedCell,
    refs: &ReferenceMassSet,
    samples_per_point: usize,
    rng: &mut impl Rng,
) -> Result<CharacterizationRow, CalibrationError> {
    let tare = cell.read_average(0.0, samples_per_point, rng);
    let loaded = cell.read_average(refs.smallest(), samples_per_point, rng);
    let coefficients = fit_two_point(cell.cell_id, tare, loaded, refs.smallest())?;
    let readings: Vec<(f64, f64)> = refs
        .masses()
        .iter()
        .map(|&m| {
            (
                m,
                coefficients.grams(cell.read_average(m, samples_per_point, rng)),
            )
        })
        .collect();
    let max_error_g = readings.iter().map(|(m, r)| r - m).fold(0.0_f64, |acc, e| {
        if e.abs() > acc.abs() {
            e
        } else {
            acc
        }
    });
    Ok(CharacterizationRow {
        cell_id: cell.cell_id,
        coefficients,
        readings,
        max_error_g,
    })
}
