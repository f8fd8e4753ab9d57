use super::{PlantParams, PlantState};

/// Updates the excursion timer and latches `fallen` once the unclamped CoM
/// projection has stayed outside the support polygon longer than the window.
pub fn fall_check(state: &PlantState, params: &PlantParams, dt_ms: u64) -> PlantState {
    let mut next = *state;
    if state.projection_inside(params) {
        next.cop_excursion_timer_ms = 0;
    } else {
        next.cop_excursion_timer_ms = state.cop_excursion_timer_ms + dt_ms;
        if next.cop_excursion_timer_ms > params.fall_window_ms {
            next.fallen = true;
        }
    }
    next
}
