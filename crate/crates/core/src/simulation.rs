//! Assembly of a runnable problem from a [`Deck`].

use std::path::{Path, PathBuf};

use crate::analysis::gaussian_ic;
use crate::deck::{Deck, InitialConditions, IntegratorSpec, OutputFormat};
use crate::discretization::{generate_uniform_grid, Dim, NodeCloud};
use crate::error::Result;
use crate::integrator::{run_explicit, run_implicit, NewtonReport, Snapshot};
use crate::material::{Body, FieldState, MaterialModel};
use crate::output::write_snapshot;
use crate::runtime::{wait_all, Runtime};

/// A deck resolved into nodes, neighbourhoods, material and initial state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub deck: Deck,
    pub body: Body,
    pub material: MaterialModel,
    pub initial: FieldState,
}

/// Trajectory of a run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    /// One report per load step; empty for explicit runs.
    pub newton: Vec<NewtonReport>,
}

impl RunResult {
    pub fn last(&self) -> &FieldState {
        &self.snapshots.last().expect("a run always yields a snapshot").state
    }
}

/// Builds the node cloud and applies the clamp tags of `deck`.
pub fn build_cloud(deck: &Deck) -> Result<NodeCloud> {
    let g = &deck.geometry;
    let dim = Dim::new(g.dim)?;
    let mut cloud = generate_uniform_grid(&g.bounds, g.h, dim, g.placement)?;
    cloud.set_density(g.density)?;
    for clamp in &deck.boundary_conditions.clamped {
        for i in cloud.select_box(&clamp.region.lo, &clamp.region.hi) {
            for &a in &clamp.axes {
                cloud.tag_mut(i).clamped[a] = true;
            }
        }
    }
    for load in &deck.boundary_conditions.loads {
        for i in cloud.select_box(&load.region.lo, &load.region.hi) {
            cloud.tag_mut(i).loaded = true;
        }
    }
    Ok(cloud)
}

/// External force density: nodal forces divided by `V_i` times the cross
/// section.
pub fn external_force_density(deck: &Deck, cloud: &NodeCloud) -> Vec<f64> {
    let d = cloud.dim().get();
    let cs = deck.geometry.cross_section;
    let vol = cloud.volumes();
    let mut b = vec![0.0; cloud.dofs()];
    for load in &deck.boundary_conditions.loads {
        let nodes = cloud.select_box(&load.region.lo, &load.region.hi);
        let (force, share) = match (&load.force_per_node, &load.total_force) {
            (Some(f), _) => (f, 1.0),
            (None, Some(f)) => (f, nodes.len().max(1) as f64),
            (None, None) => continue,
        };
        for &i in &nodes {
            for a in 0..d {
                b[i * d + a] += force[a] / share / (vol[i] * cs);
            }
        }
    }
    b
}

impl Simulation {
    pub fn from_deck(deck: Deck, rt: &Runtime) -> Result<Self> {
        let cloud = build_cloud(&deck)?;
        let material = deck.material_model()?;
        let mut initial = FieldState::zeros(cloud.len(), cloud.dim());
        initial.b = external_force_density(&deck, &cloud);
        if let InitialConditions::Gaussian(spec) = &deck.initial_conditions {
            let (u, v) = gaussian_ic(spec, &cloud)?;
            initial.u = u;
            initial.v = v;
        }
        let body = Body::new(cloud, deck.delta(), rt)?;
        Ok(Simulation {
            deck,
            body,
            material,
            initial,
        })
    }

    pub fn from_path(path: &Path, overrides: &[String], rt: &Runtime) -> Result<Self> {
        let deck = crate::deck::load_deck_with(path, overrides)?;
        Self::from_deck(deck, rt)
    }

    pub fn run(&self, rt: &Runtime) -> Result<RunResult> {
        match &self.deck.integrator {
            IntegratorSpec::Explicit(cfg) => {
                let snapshots = run_explicit(&self.body, &self.material, self.initial.clone(), cfg, rt)?;
                Ok(RunResult {
                    snapshots,
                    newton: Vec::new(),
                })
            }
            IntegratorSpec::Implicit(cfg) => {
                let (snapshots, newton) = run_implicit(&self.body, &self.material, self.initial.clone(), cfg, rt)?;
                Ok(RunResult { snapshots, newton })
            }
        }
    }

    /// Writes every `stride`-th snapshot (and the last) on background
    /// tasks, joined before returning.
    pub fn write_outputs(
        &self,
        result: &RunResult,
        dir: &Path,
        format: OutputFormat,
        rt: &Runtime,
    ) -> Result<Vec<PathBuf>> {
        let stride = self.deck.output.stride.max(1);
        let count = result.snapshots.len();
        let cloud = &self.body.cloud;
        let selected: Vec<&Snapshot> = result
            .snapshots
            .iter()
            .enumerate()
            .filter(|(k, _)| k % stride == 0 || k + 1 == count)
            .map(|(_, snap)| snap)
            .collect();
        let per_task = selected.len().div_ceil(rt.threads()).max(1);
        let batches = rt.scope(|s| {
            let handles: Vec<_> = selected
                .chunks(per_task)
                .enumerate()
                .map(|(k, batch)| {
                    s.spawn(&format!("snapshot-writer-{k}"), move || {
                        batch
                            .iter()
                            .map(|snap| write_snapshot(&snap.state, cloud, snap.step, format, dir))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            wait_all(handles)
        })?;
        let paths = batches.into_iter().flatten().collect();
        Ok(paths)
    }
}
