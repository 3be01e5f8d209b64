use serde::{Deserialize, Serialize};

use super::{apply_clamps, clamped_dofs, Snapshot};
use crate::error::{Error, Result};
use crate::material::{Body, FieldState, Material};
use crate::runtime::Runtime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    VelocityVerlet,
    CentralDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitConfig {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    /// Accumulate strain energy density at every step.
    #[serde(default = "default_true")]
    pub energy: bool,
}

fn default_stride() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl ExplicitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("time step must be positive, got {}", self.dt)));
        }
        if self.output_stride == 0 {
            return Err(Error::Parameter("output stride must be at least 1".into()));
        }
        Ok(())
    }
}

fn forces(body: &Body, material: &dyn Material, state: &mut FieldState, rt: &Runtime, energy: bool) -> Result<()> {
    let FieldState { u, f, energy: w, .. } = state;
    material.internal_force(body, u, rt, f, if energy { Some(w) } else { None })?;
    if f.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step: state.step })
    }
}

fn kick(body: &Body, state: &mut FieldState, half_dt: f64, clamped: &[bool]) {
    let d = state.dim;
    let rho = body.cloud.densities();
    for k in 0..state.v.len() {
        if !clamped[k] {
            state.v[k] += half_dt / rho[k / d] * (state.b[k] + state.f[k]);
        }
    }
}

/// Advances one velocity-Verlet step. `state.f` must hold the forces at
/// `state.u`; on return it holds the forces at the new displacement.
pub fn velocity_verlet_step(
    body: &Body,
    material: &dyn Material,
    state: &mut FieldState,
    dt: f64,
    rt: &Runtime,
    energy: bool,
) -> Result<()> {
    let clamped = clamped_dofs(&body.cloud);
    kick(body, state, 0.5 * dt, &clamped);
    for (u, v) in state.u.iter_mut().zip(&state.v) {
        *u += dt * v;
    }
    apply_clamps(state, &clamped);
    state.step += 1;
    state.time += dt;
    forces(body, material, state, rt, energy)?;
    kick(body, state, 0.5 * dt, &clamped);
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step: state.step })
    }
}

/// Displacement one step before `state`, consistent with a second-order
/// Taylor expansion: `u - dt v + dt^2/2 a`.
pub fn central_difference_bootstrap(body: &Body, state: &FieldState, dt: f64) -> Vec<f64> {
    let d = state.dim;
    let rho = body.cloud.densities();
    let clamped = clamped_dofs(&body.cloud);
    (0..state.u.len())
        .map(|k| {
            if clamped[k] {
                0.0
            } else {
                let a = (state.b[k] + state.f[k]) / rho[k / d];
                state.u[k] - dt * state.v[k] + 0.5 * dt * dt * a
            }
        })
        .collect()
}

/// Advances one central-difference step. `u_prev` holds the previous
/// displacement and is replaced by the current one.
pub fn central_difference_step(
    body: &Body,
    material: &dyn Material,
    state: &mut FieldState,
    u_prev: &mut Vec<f64>,
    dt: f64,
    rt: &Runtime,
    energy: bool,
) -> Result<()> {
    let d = state.dim;
    let rho = body.cloud.densities();
    let clamped = clamped_dofs(&body.cloud);
    let next: Vec<f64> = (0..state.u.len())
        .map(|k| {
            if clamped[k] {
                0.0
            } else {
                2.0 * state.u[k] - u_prev[k] + dt * dt / rho[k / d] * (state.b[k] + state.f[k])
            }
        })
        .collect();
    for k in 0..next.len() {
        state.v[k] = (next[k] - u_prev[k]) / (2.0 * dt);
    }
    *u_prev = std::mem::replace(&mut state.u, next);
    apply_clamps(state, &clamped);
    state.step += 1;
    state.time += dt;
    forces(body, material, state, rt, energy)?;
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step: state.step })
    }
}

/// Total energy `sum (rho |v|^2 / 2 + U) V`.
pub fn total_energy(body: &Body, state: &FieldState) -> f64 {
    let d = state.dim;
    let rho = body.cloud.densities();
    let vol = body.cloud.volumes();
    (0..state.len())
        .map(|i| {
            let v2: f64 = state.v[i * d..(i + 1) * d].iter().map(|v| v * v).sum();
            (0.5 * rho[i] * v2 + state.energy[i]) * vol[i]
        })
        .sum()
}

/// Runs `cfg.n_steps` steps from `initial` and returns the snapshots taken
/// at step 0 and every `cfg.output_stride` steps.
pub fn run_explicit(
    body: &Body,
    material: &dyn Material,
    initial: FieldState,
    cfg: &ExplicitConfig,
    rt: &Runtime,
) -> Result<Vec<Snapshot>> {
    cfg.validate()?;
    let clamped = clamped_dofs(&body.cloud);
    let mut state = initial;
    apply_clamps(&mut state, &clamped);
    forces(body, material, &mut state, rt, cfg.energy)?;
    let mut snapshots = vec![Snapshot {
        step: state.step,
        state: state.clone(),
    }];
    let mut u_prev = match cfg.scheme {
        Scheme::CentralDifference => Some(central_difference_bootstrap(body, &state, cfg.dt)),
        Scheme::VelocityVerlet => None,
    };
    let t0 = state.time;
    for k in 1..=cfg.n_steps {
        match u_prev.as_mut() {
            None => velocity_verlet_step(body, material, &mut state, cfg.dt, rt, cfg.energy)?,
            Some(prev) => central_difference_step(body, material, &mut state, prev, cfg.dt, rt, cfg.energy)?,
        }
        // Multiply rather than accumulate so sample times do not drift.
        state.time = t0 + k as f64 * cfg.dt;
        if k % cfg.output_stride == 0 || k == cfg.n_steps {
            snapshots.push(Snapshot {
                step: state.step,
                state: state.clone(),
            });
        }
    }
    Ok(snapshots)
}
