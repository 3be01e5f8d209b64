use serde::{Deserialize, Serialize};

use super::{bond_vectors, check_sizes, dot3, Body, Material};
use crate::error::{Error, Result};
use crate::runtime::Runtime;

/// Linear peridynamic solid with bulk modulus `k` and shear modulus `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBasedParams {
    pub k: f64,
    pub mu: f64,
    pub delta: f64,
}

impl StateBasedParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("K", self.k), ("mu", self.mu), ("delta", self.delta)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!("state-based {name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Scalar force state `t` of a bond of reference length `length` and
    /// extension `e`, seen from a node with weighted volume `m` and
    /// dilatation `theta`.
    #[inline]
    pub fn force_state(&self, m: f64, theta: f64, length: f64, e: f64) -> f64 {
        let ed = e - theta * length / 3.0;
        3.0 / m * self.k * theta * length + 15.0 * self.mu / m * ed
    }
}

/// Extension `|xi + eta| - |xi|` and the deformed bond length.
///
/// Evaluated as `(2 xi.eta + eta.eta) / (|xi + eta| + |xi|)`, which avoids
/// the cancellation of the direct difference for small deformations.
#[inline]
pub fn extension(xi: &[f64; 3], eta: &[f64; 3], length: f64) -> (f64, f64) {
    let y = [xi[0] + eta[0], xi[1] + eta[1], xi[2] + eta[2]];
    let deformed = dot3(&y, &y).sqrt();
    let e = (2.0 * dot3(xi, eta) + dot3(eta, eta)) / (deformed + length);
    (e, deformed)
}

fn weighted_volume(body: &Body, i: usize) -> Result<f64> {
    let volumes = body.cloud.volumes();
    let row = body.nbrs.row(i);
    let m: f64 = (0..row.len())
        .map(|k| row.lengths[k] * row.lengths[k] * volumes[row.neighbors[k]] * row.corrections[k])
        .sum();
    if m > 0.0 {
        Ok(m)
    } else {
        Err(Error::IsolatedNode(i))
    }
}

fn dilatation(body: &Body, u: &[f64], m_i: f64, i: usize) -> f64 {
    let volumes = body.cloud.volumes();
    let row = body.nbrs.row(i);
    let mut theta = 0.0;
    for k in 0..row.len() {
        let j = row.neighbors[k];
        let (xi, eta) = bond_vectors(body, u, i, j);
        let (e, _) = extension(&xi, &eta, row.lengths[k]);
        theta += 3.0 / m_i * row.lengths[k] * e * volumes[j] * row.corrections[k];
    }
    theta
}

/// Gather-form force density at node `i`; neighbour states come from `m`
/// and `theta`, indexed by node.
fn force_at(body: &Body, params: &StateBasedParams, u: &[f64], m: &[f64], theta: &[f64], i: usize) -> Result<[f64; 3]> {
    let volumes = body.cloud.volumes();
    let row = body.nbrs.row(i);
    let mut f = [0.0; 3];
    for k in 0..row.len() {
        let j = row.neighbors[k];
        let length = row.lengths[k];
        let (xi, eta) = bond_vectors(body, u, i, j);
        let (e, deformed) = extension(&xi, &eta, length);
        if deformed == 0.0 {
            return Err(Error::Collision { i, j });
        }
        let t_ij = params.force_state(m[i], theta[i], length, e);
        let t_ji = params.force_state(m[j], theta[j], length, e);
        let coef = (t_ij + t_ji) * volumes[j] * row.corrections[k] / deformed;
        for a in 0..3 {
            f[a] += coef * (xi[a] + eta[a]);
        }
    }
    Ok(f)
}

fn energy_at(body: &Body, params: &StateBasedParams, u: &[f64], m_i: f64, theta_i: f64, i: usize) -> f64 {
    let volumes = body.cloud.volumes();
    let row = body.nbrs.row(i);
    let mut dev = 0.0;
    for k in 0..row.len() {
        let j = row.neighbors[k];
        let (xi, eta) = bond_vectors(body, u, i, j);
        let (e, _) = extension(&xi, &eta, row.lengths[k]);
        let ed = e - theta_i * row.lengths[k] / 3.0;
        dev += ed * ed * volumes[j] * row.corrections[k];
    }
    0.5 * params.k * theta_i * theta_i + 7.5 * params.mu / m_i * dev
}

/// Weighted volumes `m_i = sum |xi|^2 V_j V_ij`.
pub fn compute_weighted_volumes(body: &Body, rt: &Runtime) -> Result<Vec<f64>> {
    let mut m = vec![0.0; body.len()];
    rt.try_for_each_row(&mut m, 1, |i, out| {
        out[0] = weighted_volume(body, i)?;
        Ok::<(), Error>(())
    })?;
    Ok(m)
}

/// Dilatations `theta_i = sum 3/m_i |xi| e V_j V_ij`.
pub fn compute_dilatation(body: &Body, m: &[f64], u: &[f64], rt: &Runtime) -> Result<Vec<f64>> {
    if m.len() != body.len() || u.len() != body.dofs() {
        return Err(Error::Dimension("weighted volume or displacement size mismatch".into()));
    }
    let mut theta = vec![0.0; body.len()];
    rt.try_for_each_row(&mut theta, 1, |i, out| {
        if !(m[i] > 0.0) {
            return Err(Error::IsolatedNode(i));
        }
        out[0] = dilatation(body, u, m[i], i);
        Ok(())
    })?;
    Ok(theta)
}

/// Force density from precomputed `m` and `theta`.
pub fn compute_state_forces(
    body: &Body,
    m: &[f64],
    theta: &[f64],
    params: &StateBasedParams,
    u: &[f64],
    rt: &Runtime,
    force: &mut [f64],
) -> Result<()> {
    check_sizes(body, u, force, None)?;
    let d = body.dim().get();
    rt.try_for_each_row(force, d, |i, out| {
        let f = force_at(body, params, u, m, theta, i)?;
        out.copy_from_slice(&f[..d]);
        Ok(())
    })
}

/// Strain energy density `K theta^2 / 2 + 15 mu / (2 m) sum (e^d)^2 V_j V_ij`.
pub fn compute_state_energy(
    body: &Body,
    m: &[f64],
    theta: &[f64],
    params: &StateBasedParams,
    u: &[f64],
    rt: &Runtime,
    energy: &mut [f64],
) -> Result<()> {
    if energy.len() != body.len() {
        return Err(Error::Dimension("energy size mismatch".into()));
    }
    rt.for_each_row(energy, 1, |i, out| out[0] = energy_at(body, params, u, m[i], theta[i], i));
    Ok(())
}

impl Material for StateBasedParams {
    fn horizon(&self) -> f64 {
        self.delta
    }

    fn coupling_hops(&self) -> usize {
        2
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn internal_force(
        &self,
        body: &Body,
        u: &[f64],
        rt: &Runtime,
        force: &mut [f64],
        energy: Option<&mut [f64]>,
    ) -> Result<()> {
        check_sizes(body, u, force, energy.as_deref())?;
        let m = compute_weighted_volumes(body, rt)?;
        let theta = compute_dilatation(body, &m, u, rt)?;
        match energy {
            None => compute_state_forces(body, &m, &theta, self, u, rt, force),
            Some(energy) => {
                let (f, e) = rt.join(
                    || compute_state_forces(body, &m, &theta, self, u, rt, force),
                    || compute_state_energy(body, &m, &theta, self, u, rt, energy),
                );
                f.and(e)
            }
        }
    }

    fn force_on_nodes(&self, body: &Body, u: &[f64], nodes: &[usize], out: &mut [f64]) -> Result<()> {
        let d = body.dim().get();
        let n = body.len();
        let mut m = vec![0.0; n];
        let mut theta = vec![0.0; n];
        let mut done = vec![false; n];
        for &i in nodes {
            for &j in std::iter::once(&i).chain(body.nbrs.row(i).neighbors) {
                if !done[j] {
                    done[j] = true;
                    m[j] = weighted_volume(body, j)?;
                    theta[j] = dilatation(body, u, m[j], j);
                }
            }
        }
        for (k, &i) in nodes.iter().enumerate() {
            let f = force_at(body, self, u, &m, &theta, i)?;
            out[k * d..(k + 1) * d].copy_from_slice(&f[..d]);
        }
        Ok(())
    }
}
