//! Independent oracles shared by the integration suites. Nothing here
//! calls the library code it checks.
#![allow(dead_code)]

use peridyn::discretization::{distance, volume_correction, NodeCloud};
use peridyn::material::{BondBasedParams, StateBasedParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// All pairs within `delta + h/2`, by exhaustive scan.
pub fn brute_force(cloud: &NodeCloud, delta: f64) -> Vec<Vec<usize>> {
    let cut = delta + 0.5 * cloud.spacing();
    let p = cloud.positions();
    (0..cloud.len())
        .map(|i| (0..cloud.len()).filter(|&j| j != i && distance(&p[i], &p[j]) <= cut).collect())
        .collect()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Brute-force bonds `(i, j, |xi|, V_ij)` with `j != i`, independent of the
/// library's neighbour search.
pub fn all_bonds(cloud: &NodeCloud, delta: f64) -> Vec<(usize, usize, f64, f64)> {
    let h = cloud.spacing();
    let p = cloud.positions();
    let mut bonds = Vec::new();
    for i in 0..cloud.len() {
        for j in 0..cloud.len() {
            let l = distance(&p[i], &p[j]);
            if i != j && l <= delta + 0.5 * h {
                bonds.push((i, j, l, volume_correction(l, delta, h)));
            }
        }
    }
    bonds
}

/// `|xi + eta| - |xi|` without cancellation, and `|xi + eta|`.
pub fn stretch(xi: &[f64; 3], eta: &[f64; 3], l: f64) -> (f64, f64) {
    let y = (0..3).map(|a| (xi[a] + eta[a]).powi(2)).sum::<f64>().sqrt();
    let num: f64 = (0..3).map(|a| 2.0 * xi[a] * eta[a] + eta[a] * eta[a]).sum();
    (num / (y + l), y)
}

/// Serial scatter-form state-based force: every ordered bond adds its force
/// state to `i` and subtracts it from `j`.
pub fn scatter_state_forces(cloud: &NodeCloud, params: &StateBasedParams, u: &[f64]) -> Vec<f64> {
    let d = cloud.dim().get();
    let n = cloud.len();
    let v = cloud.volumes();
    let p = cloud.positions();
    let bonds = all_bonds(cloud, params.delta);
    let vec_of = |i: usize, j: usize| {
        let mut xi = [0.0; 3];
        let mut eta = [0.0; 3];
        for a in 0..d {
            xi[a] = p[j][a] - p[i][a];
            eta[a] = u[j * d + a] - u[i * d + a];
        }
        (xi, eta)
    };
    let mut m = vec![0.0; n];
    for &(i, j, l, c) in &bonds {
        m[i] += l * l * v[j] * c;
    }
    let mut theta = vec![0.0; n];
    for &(i, j, l, c) in &bonds {
        let (xi, eta) = vec_of(i, j);
        theta[i] += 3.0 / m[i] * l * stretch(&xi, &eta, l).0 * v[j] * c;
    }
    let mut f = vec![0.0; n * d];
    for &(i, j, l, c) in &bonds {
        let (xi, eta) = vec_of(i, j);
        let (e, y) = stretch(&xi, &eta, l);
        let ed = e - theta[i] * l / 3.0;
        let t = 3.0 * params.k * theta[i] * l / m[i] + 15.0 * params.mu / m[i] * ed;
        for a in 0..d {
            let dir = (xi[a] + eta[a]) / y;
            f[i * d + a] += t * dir * v[j] * c;
            f[j * d + a] -= t * dir * v[i] * c;
        }
    }
    f
}

/// Serial scatter-form bond-based force.
pub fn scatter_bond_forces(cloud: &NodeCloud, params: &BondBasedParams, u: &[f64]) -> Vec<f64> {
    let d = cloud.dim().get();
    let v = cloud.volumes();
    let p = cloud.positions();
    let ball = match d {
        1 => 2.0 * params.delta,
        2 => std::f64::consts::PI * params.delta.powi(2),
        _ => 4.0 / 3.0 * std::f64::consts::PI * params.delta.powi(3),
    };
    let mut f = vec![0.0; cloud.len() * d];
    for (i, j, l, c) in all_bonds(cloud, params.delta) {
        if j < i {
            continue;
        }
        let s: f64 = (0..d).map(|a| (u[j * d + a] - u[i * d + a]) * (p[j][a] - p[i][a])).sum::<f64>() / (l * l);
        let r = if params.linearized { 0.0 } else { l * s * s };
        let slope = params.c * params.beta * (-params.beta * r).exp();
        let g = 4.0 / (params.delta * ball) * params.influence.eval(l / params.delta) * slope * s / l;
        for a in 0..d {
            let xi = p[j][a] - p[i][a];
            f[i * d + a] += g * xi * v[j] * c;
            f[j * d + a] -= g * xi * v[i] * c;
        }
    }
    f
}

/// Dense row-major `y = A x`.
pub fn dense_matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|r| (0..n).map(|c| a[r * n + c] * x[c]).sum()).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs())).unwrap();
        if pivot != col {
            for c in 0..n {
                m.swap(col * n + c, pivot * n + c);
            }
            x.swap(col, pivot);
        }
        for r in col + 1..n {
            let factor = m[r * n + col] / m[col * n + col];
            for c in col..n {
                m[r * n + c] -= factor * m[col * n + c];
            }
            x[r] -= factor * x[col];
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r * n + c] * x[c]).sum();
        x[r] = (x[r] - s) / m[r * n + r];
    }
    x
}

pub fn random_sparse(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n * n)
        .map(|_| if rng.gen_bool(density) { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect()
}

/// `B^T B + n I`, symmetric positive definite.
pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = random_sparse(n, 0.2, rng);
    let mut a = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            a[r * n + c] = (0..n).map(|k| b[k * n + r] * b[k * n + c]).sum::<f64>();
        }
        a[r * n + r] += n as f64 * 0.1;
    }
    a
}
