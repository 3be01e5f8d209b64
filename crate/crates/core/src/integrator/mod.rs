//! Time stepping and quasi-static load stepping.

mod explicit;
mod implicit;

pub use explicit::{
    central_difference_step, central_difference_bootstrap, run_explicit, total_energy, velocity_verlet_step,
    ExplicitConfig, Scheme,
};
pub use implicit::{
    assemble_tangent_stiffness, compute_residual, newton_load_step, residual_at, run_implicit, ImplicitConfig,
    NewtonReport,
};

use crate::discretization::NodeCloud;
use crate::material::FieldState;

/// Per-DOF clamp mask derived from the node tags.
pub fn clamped_dofs(cloud: &NodeCloud) -> Vec<bool> {
    let d = cloud.dim().get();
    cloud
        .bc_tags()
        .iter()
        .flat_map(|t| (0..d).map(move |a| t.is_clamped(a)))
        .collect()
}

/// Zeroes displacement and velocity on clamped DOFs.
pub fn apply_clamps(state: &mut FieldState, clamped: &[bool]) {
    for (k, &c) in clamped.iter().enumerate() {
        if c {
            state.u[k] = 0.0;
            state.v[k] = 0.0;
        }
    }
}

/// One emitted state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: FieldState,
}
