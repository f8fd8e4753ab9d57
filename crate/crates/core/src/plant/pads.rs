use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{PlantParams, PlantState, Support};
use crate::calibration::fit_two_point;
use crate::calibration::{
    estimate_mass, CalibrationCoefficients, CalibrationStore, ReferenceMassSet, SimulatedCell,
    CELLS_PER_FOOT, CELL_COUNT, DEFAULT_SAMPLES_PER_POINT,
};

/// CoP the pads should report: the CoM projection clamped to the support
/// polygon, in normalized robot-frame units.
pub fn ground_truth_cop(state: &PlantState, params: &PlantParams) -> (f64, f64) {
    let (lo, hi) = params.polygon(state.support);
    let p = state.com_projection(params).clamp(lo, hi);
    (p / params.foot_half_width_m, params.cop_y)
}

/// Bilinear split of `f` over the four corner pads for a foot-local CoP.
fn bilinear(f: f64, x: f64, y: f64) -> [f64; CELLS_PER_FOOT] {
    let x = x.clamp(-1.0, 1.0);
    let y = y.clamp(-1.0, 1.0);
    // front-left, front-right, rear-left, rear-right
    [
        f * (1.0 - x) * (1.0 + y) / 4.0,
        f * (1.0 + x) * (1.0 + y) / 4.0,
        f * (1.0 - x) * (1.0 - y) / 4.0,
        f * (1.0 + x) * (1.0 - y) / 4.0,
    ]
}

/// Noiseless cell masses for the current state, grams, left foot first.
///
/// The eight-cell centroid in the robot frame equals [`ground_truth_cop`].
pub fn pad_forces_ideal(state: &PlantState, params: &PlantParams) -> [f64; CELL_COUNT] {
    let f = params.weight_g();
    let (x, y) = ground_truth_cop(state, params);
    let (left_f, left_x, right_f, right_x) = match state.support {
        Support::LeftOnly => (f, x + 1.0, 0.0, 0.0),
        Support::RightOnly => (0.0, 0.0, f, x - 1.0),
        Support::Double if x <= -1.0 => (f, x + 1.0, 0.0, 0.0),
        Support::Double if x >= 1.0 => (0.0, 0.0, f, x - 1.0),
        // lever rule between the two foot centers
        Support::Double => (f * (1.0 - x) / 2.0, 0.0, f * (1.0 + x) / 2.0, 0.0),
    };
    let l = bilinear(left_f, left_x, y);
    let r = bilinear(right_f, right_x, y);
    std::array::from_fn(|i| {
        if i < CELLS_PER_FOOT {
            l[i]
        } else {
            r[i - CELLS_PER_FOOT]
        }
    })
}

/// Eight simulated load cells with their fitted calibration.
#[derive(Debug, Clone)]
pub struct SensorArray {
    cells: [SimulatedCell; CELL_COUNT],
    store: CalibrationStore,
    rng: ChaCha8Rng,
}

impl SensorArray {
    /// Draws cells from `params.noise` and calibrates each at tare plus the
    /// smallest reference mass.
    pub fn new(params: &PlantParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.noise_seed);
        let cells: [SimulatedCell; CELL_COUNT] = std::array::from_fn(|i| {
            SimulatedCell::random((i % CELLS_PER_FOOT) as u8, &params.noise, &mut rng)
        });
        let reference = ReferenceMassSet::default().smallest();
        let coeffs: [CalibrationCoefficients; CELL_COUNT] = std::array::from_fn(|i| {
            let cell = &cells[i];
            let tare = cell.read_average(0.0, DEFAULT_SAMPLES_PER_POINT, &mut rng);
            let loaded = cell.read_average(reference, DEFAULT_SAMPLES_PER_POINT, &mut rng);
            fit_two_point(cell.cell_id, tare, loaded, reference)
                .expect("simulated cells have positive gradients")
        });
        Self {
            cells,
            store: CalibrationStore::from_cells(coeffs),
            rng,
        }
    }

    pub fn cells(&self) -> &[SimulatedCell; CELL_COUNT] {
        &self.cells
    }

    pub fn store(&self) -> &CalibrationStore {
        &self.store
    }

    pub fn set_store(&mut self, store: CalibrationStore) {
        self.store = store;
    }

    pub fn set_coefficients(&mut self, index: usize, coeffs: CalibrationCoefficients) {
        self.store.set(index, coeffs);
    }

    /// Re-zeroes one cell at its current load, as a tare button does.
    pub fn tare(&mut self, index: usize, current_load_g: f64, samples: usize) {
        let counts = self.cells[index].read_average(current_load_g, samples, &mut self.rng);
        let mut c = *self.store.get(index);
        c.offset_counts = counts;
        self.store.set(index, c);
    }

    /// One ADC sample per cell converted through the stored coefficients.
    pub fn read(&mut self, grams: &[f64; CELL_COUNT], t_ms: u64) -> [f64; CELL_COUNT] {
        std::array::from_fn(|i| {
            let raw = self.cells[i].read(grams[i], t_ms, &mut self.rng);
            estimate_mass(&raw, self.store.get(i))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::NoiseModel;
    use crate::control::JointAngles;

    #[test]
    fn double_support_centered_is_uniform() {
        let params = PlantParams::default();
        let m = pad_forces_ideal(&PlantState::default(), &params);
        assert!(m.iter().all(|&v| (v - 375.0).abs() < 1e-9), "{m:?}");
    }

    #[test]
    fn left_support_over_foot_center() {
        let params = PlantParams::default();
        // shift the CoM by one foot half width toward -X with the hips
        let hip = -params.foot_half_width_m / (2.0 * params.sensitivity.hip);
        let state = PlantState {
            support: Support::LeftOnly,
            joint_angles_deg: JointAngles {
                hip_l: hip,
                hip_r: hip,
                ..JointAngles::default()
            },
            ..PlantState::default()
        };
        let m = pad_forces_ideal(&state, &params);
        assert!(m[..4].iter().all(|&v| (v - 750.0).abs() < 1e-9));
        assert!(m[4..].iter().all(|&v| v == 0.0));
        let (x, _) = ground_truth_cop(&state, &params);
        assert!((x + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pads_stay_in_polygon_when_projection_leaves_it() {
        let params = PlantParams::default();
        let state = PlantState {
            support: Support::LeftOnly,
            roll_angle_rad: -0.5,
            ..PlantState::default()
        };
        assert!(!state.projection_inside(&params));
        let (x, _) = ground_truth_cop(&state, &params);
        assert_eq!(x, -2.0);
        assert!(state.com_projection(&params) / params.foot_half_width_m < -2.0);
    }

    #[test]
    fn noiseless_sensors_are_nearly_exact() {
        let params = PlantParams {
            noise: NoiseModel::noiseless(),
            ..PlantParams::default()
        };
        let mut sensors = SensorArray::new(&params);
        let truth = [0.0, 10.0, 100.0, 375.0, 750.0, 1000.0, 1500.0, 3000.0];
        let got = sensors.read(&truth, 0);
        for (t, g) in truth.iter().zip(got) {
            // counts are integers, so the 50 g fit carries ~2e-4 relative slope error
            assert!((t - g).abs() < 0.05 + 3e-4 * t, "{t} vs {g}");
        }
    }

    #[test]
    fn tare_zeroes_a_loaded_cell() {
        let params = PlantParams {
            noise: NoiseModel::noiseless(),
            ..PlantParams::default()
        };
        let mut sensors = SensorArray::new(&params);
        sensors.tare(2, 400.0, 16);
        let got = sensors.read(&[0.0, 0.0, 400.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0);
        assert!(got[2].abs() < 0.05, "{}", got[2]);
    }
}
