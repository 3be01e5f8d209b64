//! Validation oracles: classical elasticity solutions, field norms,
//! convergence rates and Gaussian initial conditions.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discretization::NodeCloud;
use crate::error::{Error, Result};

/// Discrete L2 norm `sqrt(sum |f_i|^2 V_i)` of a node-major field.
pub fn l2_field_norm(field: &[f64], cloud: &NodeCloud) -> f64 {
    let n = cloud.len();
    assert_eq!(field.len() % n, 0, "field length is not a multiple of the node count");
    let width = field.len() / n;
    let vol = cloud.volumes();
    field
        .chunks_exact(width)
        .zip(vol)
        .map(|(f, v)| f.iter().map(|x| x * x).sum::<f64>() * v)
        .sum::<f64>()
        .sqrt()
}

/// A run on one mesh: its nodes and the displacement at each sample time.
#[derive(Debug, Clone)]
pub struct MeshSeries {
    pub cloud: NodeCloud,
    pub fields: Vec<Vec<f64>>,
}

/// Three runs on nested meshes, coarse to fine, with `h_k / h_{k+1} = ratio`.
#[derive(Debug, Clone)]
pub struct ConvergenceInput {
    pub meshes: [MeshSeries; 3],
    pub ratio: f64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub time: f64,
    /// `None` where the fine difference vanishes.
    pub alpha: Option<f64>,
}

/// Index of the node of `fine` coinciding with each node of `coarse`.
fn coincident_nodes(coarse: &NodeCloud, fine: &NodeCloud) -> Result<Vec<usize>> {
    let h = fine.spacing();
    let key = |p: &[f64; 3]| p.map(|x| (x / h).round() as i64);
    let index: HashMap<[i64; 3], usize> = fine.positions().iter().enumerate().map(|(i, p)| (key(p), i)).collect();
    coarse
        .positions()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .get(&key(p))
                .copied()
                .filter(|&j| crate::discretization::distance(p, &fine.positions()[j]) <= 1e-6 * h)
                .ok_or_else(|| Error::Convergence(format!("coarse node {i} at {p:?} has no coincident fine node")))
        })
        .collect()
}

/// `||u_a - u_b||` over the nodes of `base`, using base volumes.
fn difference_norm(base: &NodeCloud, a: &[f64], map_a: &[usize], b: &[f64], map_b: &[usize]) -> f64 {
    let d = base.dim().get();
    let vol = base.volumes();
    (0..base.len())
        .map(|i| {
            let (ia, ib) = (map_a[i], map_b[i]);
            (0..d).map(|k| (a[ia * d + k] - b[ib * d + k]).powi(2)).sum::<f64>() * vol[i]
        })
        .sum::<f64>()
        .sqrt()
}

/// Rate estimate `(log ||u1 - u2|| - log ||u2 - u3||) / log r` per sample
/// time. Both differences are taken at the nodes of the coarsest mesh,
/// which all three meshes share.
pub fn convergence_rate(input: &ConvergenceInput) -> Result<Vec<RatePoint>> {
    let [m1, m2, m3] = &input.meshes;
    if !(input.ratio > 1.0) {
        return Err(Error::Convergence(format!("mesh ratio must exceed 1, got {}", input.ratio)));
    }
    for (a, b) in [(m1, m2), (m2, m3)] {
        let r = a.cloud.spacing() / b.cloud.spacing();
        if (r - input.ratio).abs() > 1e-9 * input.ratio {
            return Err(Error::Convergence(format!("spacing ratio {r} differs from {}", input.ratio)));
        }
    }
    let samples = input.times.len();
    if [m1, m2, m3].iter().any(|m| m.fields.len() != samples) {
        return Err(Error::Convergence("every mesh needs one field per sample time".into()));
    }
    let base = &m1.cloud;
    let id: Vec<usize> = (0..base.len()).collect();
    let to2 = coincident_nodes(base, &m2.cloud)?;
    let to3 = coincident_nodes(base, &m3.cloud)?;
    Ok((0..samples)
        .map(|t| {
            let coarse = difference_norm(base, &m1.fields[t], &id, &m2.fields[t], &to2);
            let fine = difference_norm(base, &m2.fields[t], &to2, &m3.fields[t], &to3);
            RatePoint {
                time: input.times[t],
                alpha: rate_from_norms(coarse, fine, input.ratio),
            }
        })
        .collect())
}

/// `(log coarse - log fine) / log ratio`, undefined when either is zero.
pub fn rate_from_norms(coarse: f64, fine: f64, ratio: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse.ln() - fine.ln()) / ratio.ln())
}

/// Mean of the defined rates whose time lies outside `exclude`.
pub fn mean_rate(points: &[RatePoint], exclude: Option<(f64, f64)>) -> Option<f64> {
    let kept: Vec<f64> = points
        .iter()
        .filter(|p| exclude.is_none_or(|(lo, hi)| p.time < lo || p.time > hi))
        .filter_map(|p| p.alpha)
        .collect();
    (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
}

pub fn rate_csv(points: &[RatePoint]) -> String {
    let mut out = String::from("time,alpha\n");
    for p in points {
        match p.alpha {
            Some(a) => writeln!(out, "{},{}", p.time, a),
            None => writeln!(out, "{},nan", p.time),
        }
        .expect("writing to a string");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensileSolution {
    pub strain: f64,
    pub stress: f64,
    pub energy: f64,
}

/// Uniform bar of area `a` and modulus `e` under axial force `f`.
pub fn ccm_1d_tensile(f: f64, a: f64, e: f64) -> TensileSolution {
    let stress = f / a;
    TensileSolution {
        strain: f / (a * e),
        stress,
        energy: stress * stress / (2.0 * e),
    }
}

/// Plate of width `w` and thickness `t`, clamped at `x = w` and loaded by
/// the total force `f` on the opposite edge. Returns `(u_x, u_y)` at `x`.
pub fn ccm_2d_tensile(f: f64, e: f64, nu: f64, w: f64, t: f64, x: [f64; 2]) -> (f64, f64) {
    let ux = f / (e * w * t) * (x[0] - w);
    let uy = -nu * f / (e * t) * (x[1] / w - 0.5);
    (ux, uy)
}

/// One row of a `node,quantity,pd,ccm,rel_error` comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub node: usize,
    pub quantity: String,
    pub pd: f64,
    pub ccm: f64,
}

impl Comparison {
    pub fn new(node: usize, quantity: &str, pd: f64, ccm: f64) -> Self {
        Comparison {
            node,
            quantity: quantity.to_string(),
            pd,
            ccm,
        }
    }

    /// `|pd - ccm| / |ccm|`, or the absolute error when `ccm` is zero.
    pub fn rel_error(&self) -> f64 {
        if self.ccm == 0.0 {
            (self.pd - self.ccm).abs()
        } else {
            ((self.pd - self.ccm) / self.ccm).abs()
        }
    }
}

pub fn comparison_csv(rows: &[Comparison]) -> String {
    let mut out = String::from("node,quantity,pd,ccm,rel_error\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.node, r.quantity, r.pd, r.ccm, r.rel_error()).expect("writing to a string");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPulse {
    pub center: Vec<f64>,
    /// Scalar in 1D, vector in higher dimensions.
    pub amplitude: Vec<f64>,
}

/// `u0(X) = sum_c exp(-|X - x_c|^2 / width) a_c`, zero initial velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianIc {
    pub pulses: Vec<GaussianPulse>,
    pub width: f64,
}

impl GaussianIc {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Parameter(format!("Gaussian width must be positive, got {}", self.width)));
        }
        if self.pulses.iter().any(|p| p.center.len() != dim || p.amplitude.len() != dim) {
            return Err(Error::Parameter(format!("Gaussian centres and amplitudes need {dim} components")));
        }
        Ok(())
    }
}

/// Initial displacement and velocity fields for `spec`.
pub fn gaussian_ic(spec: &GaussianIc, cloud: &NodeCloud) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = cloud.dim().get();
    spec.validate(d)?;
    let mut u = vec![0.0; cloud.dofs()];
    for (i, x) in cloud.positions().iter().enumerate() {
        for pulse in &spec.pulses {
            let r2: f64 = (0..d).map(|a| (x[a] - pulse.center[a]).powi(2)).sum();
            let g = (-r2 / spec.width).exp();
            for a in 0..d {
                u[i * d + a] += g * pulse.amplitude[a];
            }
        }
    }
    Ok((u, vec![0.0; cloud.dofs()]))
}
