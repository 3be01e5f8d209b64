use serde::{Deserialize, Serialize};

use super::{apply_clamps, clamped_dofs, Snapshot};
use crate::discretization::NodeCloud;
use crate::error::{Error, Result};
use crate::linalg::{solve, SolverKind, SparseMatrix};
use crate::material::{Body, FieldState, Material};
use crate::runtime::Runtime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplicitConfig {
    #[serde(default = "one")]
    pub n_load_steps: usize,
    /// Absolute tolerance on the volume-weighted residual norm.
    pub tau: f64,
    /// Finite-difference perturbation; `1e-6 h` when absent.
    #[serde(default)]
    pub upsilon: Option<f64>,
    #[serde(default = "default_newton")]
    pub max_newton_iters: usize,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    /// Krylov iteration cap; ten times the system size when absent.
    #[serde(default)]
    pub solver_max_iters: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_newton() -> usize {
    20
}

fn default_solver() -> SolverKind {
    SolverKind::Bicgstab
}

fn default_solver_tol() -> f64 {
    1e-10
}

impl ImplicitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Parameter(format!("residual tolerance must be positive, got {}", self.tau)));
        }
        if let Some(up) = self.upsilon {
            if !(up > 0.0 && up.is_finite()) {
                return Err(Error::Parameter(format!("perturbation must be positive, got {up}")));
            }
        }
        if self.max_newton_iters == 0 || self.n_load_steps == 0 {
            return Err(Error::Parameter("load steps and Newton iterations must be at least 1".into()));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(Error::Parameter(format!("solver tolerance must lie in (0, 1), got {}", self.solver_tol)));
        }
        Ok(())
    }

    pub fn perturbation(&self, h: f64) -> f64 {
        self.upsilon.unwrap_or(1e-6 * h)
    }
}

/// Residual `r = (f + b) V` on free DOFs, 0 on clamped ones, and its norm.
pub fn compute_residual(cloud: &NodeCloud, state: &FieldState, rt: &Runtime) -> (Vec<f64>, f64) {
    let d = cloud.dim().get();
    let clamped = clamped_dofs(cloud);
    let vol = cloud.volumes();
    let r: Vec<f64> = (0..state.f.len())
        .map(|k| if clamped[k] { 0.0 } else { (state.f[k] + state.b[k]) * vol[k / d] })
        .collect();
    let norm = rt.norm(&r);
    (r, norm)
}

/// Residual at displacement `u` under load `b`.
pub fn residual_at(body: &Body, material: &dyn Material, u: &[f64], b: &[f64], rt: &Runtime) -> Result<(Vec<f64>, f64)> {
    let mut state = FieldState::zeros(body.len(), body.dim());
    state.u.copy_from_slice(u);
    state.b.copy_from_slice(b);
    material.internal_force(body, u, rt, &mut state.f, None)?;
    Ok(compute_residual(&body.cloud, &state, rt))
}

/// Nodes reachable from every node within `hops` neighbourhood steps,
/// sorted ascending.
fn reach(body: &Body, hops: usize) -> Vec<Vec<usize>> {
    let n = body.len();
    let mut seen = vec![usize::MAX; n];
    (0..n)
        .map(|q| {
            let mut set = vec![q];
            seen[q] = q;
            let mut frontier = vec![q];
            for _ in 0..hops {
                let mut next = Vec::new();
                for &p in &frontier {
                    for &j in body.nbrs.row(p).neighbors {
                        if seen[j] != q {
                            seen[j] = q;
                            next.push(j);
                        }
                    }
                }
                set.extend_from_slice(&next);
                frontier = next;
            }
            set.sort_unstable();
            set
        })
        .collect()
}

/// Tangent `K = -dr/du` by central differences with perturbation
/// `upsilon`. Only DOFs within the material's coupling range of each
/// perturbed node are evaluated. Clamped rows and columns become identity.
pub fn assemble_tangent_stiffness(
    body: &Body,
    material: &dyn Material,
    u: &[f64],
    upsilon: f64,
    rt: &Runtime,
) -> Result<SparseMatrix> {
    let d = body.dim().get();
    let dofs = body.dofs();
    if u.len() != dofs {
        return Err(Error::Dimension("displacement size does not match the body".into()));
    }
    let clamped = clamped_dofs(&body.cloud);
    let vol = body.cloud.volumes();
    let reach = reach(body, material.coupling_hops());
    let mut columns: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); dofs];
    rt.try_for_each_row(&mut columns, 1, |col, out| -> Result<()> {
        if clamped[col] {
            out[0] = vec![(col, col, 1.0)];
            return Ok(());
        }
        let nodes = &reach[col / d];
        let mut up = u.to_vec();
        let mut plus = vec![0.0; nodes.len() * d];
        let mut minus = vec![0.0; nodes.len() * d];
        up[col] = u[col] + upsilon;
        material.force_on_nodes(body, &up, nodes, &mut plus)?;
        up[col] = u[col] - upsilon;
        material.force_on_nodes(body, &up, nodes, &mut minus)?;
        let mut entries = Vec::new();
        for (k, &node) in nodes.iter().enumerate() {
            for a in 0..d {
                let row = node * d + a;
                if clamped[row] {
                    continue;
                }
                let value = -(plus[k * d + a] - minus[k * d + a]) * vol[node] / (2.0 * upsilon);
                if value != 0.0 {
                    entries.push((row, col, value));
                }
            }
        }
        out[0] = entries;
        Ok(())
    })?;
    let triplets = columns.into_iter().flatten().collect();
    Ok(SparseMatrix::from_triplets(dofs, dofs, triplets)?)
}

/// Outcome of one Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual norm before each iteration and after the last one.
    pub residuals: Vec<f64>,
    pub solver_iterations: Vec<usize>,
}

/// Newton iteration for `r(u) = 0` at fixed load `b`, starting from `u`.
pub fn newton_load_step(
    body: &Body,
    material: &dyn Material,
    u: &mut [f64],
    b: &[f64],
    cfg: &ImplicitConfig,
    rt: &Runtime,
) -> Result<NewtonReport> {
    cfg.validate()?;
    let upsilon = cfg.perturbation(body.cloud.spacing());
    let max_solver = cfg.solver_max_iters.unwrap_or(10 * body.dofs().max(10));
    let mut report = NewtonReport {
        iterations: 0,
        residuals: Vec::new(),
        solver_iterations: Vec::new(),
    };
    loop {
        let (r, norm) = residual_at(body, material, u, b, rt)?;
        if !norm.is_finite() {
            return Err(Error::NonFinite { step: report.iterations });
        }
        report.residuals.push(norm);
        if norm < cfg.tau {
            return Ok(report);
        }
        let trace = &report.residuals;
        if trace.len() >= 4 && trace[trace.len() - 4..].windows(2).all(|w| w[1] >= w[0]) {
            return Err(Error::Newton {
                iterations: report.iterations,
                reason: "residual stagnated",
                trace: report.residuals,
            });
        }
        if report.iterations == cfg.max_newton_iters {
            return Err(Error::Newton {
                iterations: report.iterations,
                reason: "iteration limit reached",
                trace: report.residuals,
            });
        }
        let k = assemble_tangent_stiffness(body, material, u, upsilon, rt)?;
        let (du, solve_report) = solve(cfg.solver, &k, &r, cfg.solver_tol, max_solver, rt)?;
        let name = match cfg.solver {
            SolverKind::Cg => "CG",
            SolverKind::Bicgstab => "BiCGSTAB",
        };
        solve_report.require(name, cfg.solver_tol * norm)?;
        report.solver_iterations.push(solve_report.iterations);
        for (x, dx) in u.iter_mut().zip(&du) {
            *x += dx;
        }
        report.iterations += 1;
    }
}

/// Quasi-static load stepping with the load ramped linearly to
/// `state.b`. Returns the state after each load step.
pub fn run_implicit(
    body: &Body,
    material: &dyn Material,
    initial: FieldState,
    cfg: &ImplicitConfig,
    rt: &Runtime,
) -> Result<(Vec<Snapshot>, Vec<NewtonReport>)> {
    cfg.validate()?;
    let clamped = clamped_dofs(&body.cloud);
    let full = initial.b.clone();
    let mut state = initial;
    apply_clamps(&mut state, &clamped);
    let mut snapshots = Vec::with_capacity(cfg.n_load_steps);
    let mut reports = Vec::with_capacity(cfg.n_load_steps);
    for s in 1..=cfg.n_load_steps {
        let scale = s as f64 / cfg.n_load_steps as f64;
        state.b = full.iter().map(|b| b * scale).collect();
        let report = newton_load_step(body, material, &mut state.u, &state.b, cfg, rt)?;
        let FieldState { u, f, energy, .. } = &mut state;
        material.internal_force(body, u, rt, f, Some(energy))?;
        state.step = s;
        state.time = scale;
        snapshots.push(Snapshot { step: s, state: state.clone() });
        reports.push(report);
    }
    Ok((snapshots, reports))
}
