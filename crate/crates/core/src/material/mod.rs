//! Constitutive kernels.
//!
//! Both models assemble forces in gather form: every node sums the
//! contributions of its own bonds and never writes to a neighbour, which
//! keeps the kernels race-free and bitwise deterministic under
//! [`Runtime`] loops.

mod bond;
mod state;

use serde::{Deserialize, Serialize};

pub use bond::{bond_strain, compute_bond_forces, BondBasedParams, Influence};
pub use state::{
    compute_dilatation, compute_state_energy, compute_state_forces, compute_weighted_volumes, extension,
    StateBasedParams,
};

use crate::discretization::{Dim, NeighborList, NodeCloud};
use crate::error::{Error, Result};
use crate::runtime::Runtime;

/// A discretized body: nodes plus their horizon neighbourhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub cloud: NodeCloud,
    pub nbrs: NeighborList,
}

impl Body {
    pub fn new(cloud: NodeCloud, delta: f64, rt: &Runtime) -> Result<Self> {
        let nbrs = crate::discretization::build_neighborhoods(&cloud, delta, rt)?;
        Ok(Body { cloud, nbrs })
    }

    pub fn dim(&self) -> Dim {
        self.cloud.dim()
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn dofs(&self) -> usize {
        self.cloud.dofs()
    }
}

/// Time-step snapshot of the nodal fields, stored node-major (`n * d`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub dim: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    pub b: Vec<f64>,
    pub energy: Vec<f64>,
    pub time: f64,
    /// Completed steps (time steps or load steps).
    pub step: usize,
}

impl FieldState {
    pub fn zeros(n: usize, dim: Dim) -> Self {
        let d = dim.get();
        FieldState {
            dim: d,
            u: vec![0.0; n * d],
            v: vec![0.0; n * d],
            f: vec![0.0; n * d],
            b: vec![0.0; n * d],
            energy: vec![0.0; n],
            time: 0.0,
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.v, &self.f, &self.b, &self.energy]
            .iter()
            .all(|a| a.iter().all(|x| x.is_finite()))
    }
}

/// Common interface of the constitutive models.
pub trait Material: Send + Sync + std::fmt::Debug {
    fn horizon(&self) -> f64;

    /// Graph distance over which a displacement perturbation changes forces:
    /// 1 for pairwise laws, 2 when forces depend on neighbour dilatations.
    fn coupling_hops(&self) -> usize;

    /// Whether the force is linear in the displacement.
    fn is_linear(&self) -> bool;

    /// Internal force density for all nodes, optionally with strain energy
    /// density.
    fn internal_force(
        &self,
        body: &Body,
        u: &[f64],
        rt: &Runtime,
        force: &mut [f64],
        energy: Option<&mut [f64]>,
    ) -> Result<()>;

    /// Serial force density for the listed nodes only; `out` holds
    /// `nodes.len() * d` values.
    fn force_on_nodes(&self, body: &Body, u: &[f64], nodes: &[usize], out: &mut [f64]) -> Result<()>;
}

/// Material selected by a deck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaterialModel {
    BondBased(BondBasedParams),
    StateBased(StateBasedParams),
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MaterialModel::BondBased(p) => p.validate(),
            MaterialModel::StateBased(p) => p.validate(),
        }
    }

    fn inner(&self) -> &dyn Material {
        match self {
            MaterialModel::BondBased(p) => p,
            MaterialModel::StateBased(p) => p,
        }
    }
}

impl Material for MaterialModel {
    fn horizon(&self) -> f64 {
        self.inner().horizon()
    }

    fn coupling_hops(&self) -> usize {
        self.inner().coupling_hops()
    }

    fn is_linear(&self) -> bool {
        self.inner().is_linear()
    }

    fn internal_force(
        &self,
        body: &Body,
        u: &[f64],
        rt: &Runtime,
        force: &mut [f64],
        energy: Option<&mut [f64]>,
    ) -> Result<()> {
        self.inner().internal_force(body, u, rt, force, energy)
    }

    fn force_on_nodes(&self, body: &Body, u: &[f64], nodes: &[usize], out: &mut [f64]) -> Result<()> {
        self.inner().force_on_nodes(body, u, nodes, out)
    }
}

pub(crate) fn check_sizes(body: &Body, u: &[f64], force: &[f64], energy: Option<&[f64]>) -> Result<()> {
    let n = body.len();
    let dofs = body.dofs();
    if u.len() != dofs || force.len() != dofs || energy.is_some_and(|e| e.len() != n) {
        return Err(Error::Dimension(format!(
            "field sizes do not match a {}-dimensional body of {n} nodes",
            body.dim()
        )));
    }
    Ok(())
}

/// Bond vector and deformation of bond `i -> j` padded to three components.
#[inline]
pub(crate) fn bond_vectors(body: &Body, u: &[f64], i: usize, j: usize) -> ([f64; 3], [f64; 3]) {
    let d = body.dim().get();
    let p = body.cloud.positions();
    let mut xi = [0.0; 3];
    let mut eta = [0.0; 3];
    for a in 0..d {
        xi[a] = p[j][a] - p[i][a];
        eta[a] = u[j * d + a] - u[i * d + a];
    }
    (xi, eta)
}

#[inline]
pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
