use serde::{Deserialize, Serialize};

use super::{bond_vectors, check_sizes, dot3, Body, Material};
use crate::error::{Error, Result};
use crate::runtime::Runtime;

/// Radial weight `J(r)` of a bond, evaluated at `r = |xi| / delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Influence {
    /// `c1 * r * exp(-r^2 / c2)`.
    Gaussian { c1: f64, c2: f64 },
    /// 1 inside the unit ball, 0 on and beyond its boundary.
    Constant,
}

impl Default for Influence {
    fn default() -> Self {
        Influence::Gaussian { c1: 1.0, c2: 0.4 }
    }
}

impl Influence {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Influence::Gaussian { c1, c2 } => c1 * r * (-r * r / c2).exp(),
            Influence::Constant => {
                if r < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Pairwise softening law with potential `psi(r) = C (1 - exp(-beta r))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondBasedParams {
    pub c: f64,
    pub beta: f64,
    pub delta: f64,
    #[serde(default)]
    pub influence: Influence,
    /// Use `psi'(0)` in place of `psi'(|xi| S^2)`.
    #[serde(default)]
    pub linearized: bool,
}

impl BondBasedParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("C", self.c), ("beta", self.beta), ("delta", self.delta)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!("bond-based {name} must be positive, got {value}")));
            }
        }
        if let Influence::Gaussian { c1, c2 } = self.influence {
            if !(c1.is_finite() && c2 > 0.0 && c2.is_finite()) {
                return Err(Error::Parameter(format!("invalid Gaussian influence c1={c1}, c2={c2}")));
            }
        }
        Ok(())
    }

    pub fn psi(&self, r: f64) -> f64 {
        self.c * (1.0 - (-self.beta * r).exp())
    }

    pub fn psi_prime(&self, r: f64) -> f64 {
        self.c * self.beta * (-self.beta * r).exp()
    }

    pub fn influence(&self, r_scaled: f64) -> f64 {
        self.influence.eval(r_scaled)
    }

    /// Force magnitude factor `J psi'(|xi| S^2) S` of a single bond, without
    /// the volume weights and the normalisation.
    pub fn bond_force_factor(&self, length: f64, strain: f64) -> f64 {
        let slope = if self.linearized {
            self.psi_prime(0.0)
        } else {
            self.psi_prime(length * strain * strain)
        };
        self.influence(length / self.delta) * slope * strain
    }

    fn bond_energy_factor(&self, length: f64, strain: f64) -> f64 {
        let r = length * strain * strain;
        let potential = if self.linearized {
            self.psi_prime(0.0) * r
        } else {
            self.psi(r)
        };
        self.influence(length / self.delta) * potential
    }

    /// Force density and energy density at node `i`.
    fn node(&self, body: &Body, u: &[f64], i: usize, want_energy: bool) -> ([f64; 3], f64) {
        let norm = body.dim().ball_measure(self.delta);
        let volumes = body.cloud.volumes();
        let row = body.nbrs.row(i);
        let mut f = [0.0; 3];
        let mut w = 0.0;
        for k in 0..row.len() {
            let j = row.neighbors[k];
            let length = row.lengths[k];
            let (xi, eta) = bond_vectors(body, u, i, j);
            let strain = dot3(&eta, &xi) / (length * length);
            let weight = volumes[j] * row.corrections[k];
            let coef = 4.0 / (self.delta * norm) * self.bond_force_factor(length, strain) / length * weight;
            for a in 0..3 {
                f[a] += coef * xi[a];
            }
            if want_energy {
                w += self.bond_energy_factor(length, strain) * weight / (self.delta * norm);
            }
        }
        (f, w)
    }
}

/// Projected bond strain `((u_j - u_i) . xi) / |xi|^2` with `xi = X_j - X_i`.
pub fn bond_strain(u_i: &[f64], u_j: &[f64], x_i: &[f64], x_j: &[f64]) -> Result<f64> {
    if u_i.len() != x_i.len() || u_j.len() != x_i.len() || x_j.len() != x_i.len() {
        return Err(Error::Dimension("bond vectors differ in length".into()));
    }
    let mut num = 0.0;
    let mut len2 = 0.0;
    for a in 0..x_i.len() {
        let xi = x_j[a] - x_i[a];
        num += (u_j[a] - u_i[a]) * xi;
        len2 += xi * xi;
    }
    if len2 == 0.0 {
        return Err(Error::Geometry("zero-length bond".into()));
    }
    Ok(num / len2)
}

/// Force density `f` and strain energy density `U` of a bond-based body.
pub fn compute_bond_forces(body: &Body, params: &BondBasedParams, u: &[f64], rt: &Runtime) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut f = vec![0.0; body.dofs()];
    let mut w = vec![0.0; body.len()];
    params.internal_force(body, u, rt, &mut f, Some(&mut w))?;
    Ok((f, w))
}

impl Material for BondBasedParams {
    fn horizon(&self) -> f64 {
        self.delta
    }

    fn coupling_hops(&self) -> usize {
        1
    }

    fn is_linear(&self) -> bool {
        self.linearized
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
        let d = body.dim().get();
        match energy {
            None => rt.for_each_row(force, d, |i, out| {
                let (f, _) = self.node(body, u, i, false);
                out.copy_from_slice(&f[..d]);
            }),
            Some(energy) => {
                let mut packed = vec![0.0; body.len() * (d + 1)];
                rt.for_each_row(&mut packed, d + 1, |i, out| {
                    let (f, w) = self.node(body, u, i, true);
                    out[..d].copy_from_slice(&f[..d]);
                    out[d] = w;
                });
                for (i, chunk) in packed.chunks_exact(d + 1).enumerate() {
                    force[i * d..(i + 1) * d].copy_from_slice(&chunk[..d]);
                    energy[i] = chunk[d];
                }
            }
        }
        Ok(())
    }

    fn force_on_nodes(&self, body: &Body, u: &[f64], nodes: &[usize], out: &mut [f64]) -> Result<()> {
        let d = body.dim().get();
        for (k, &i) in nodes.iter().enumerate() {
            let (f, _) = self.node(body, u, i, false);
            out[k * d..(k + 1) * d].copy_from_slice(&f[..d]);
        }
        Ok(())
    }
}
