use serde::{Deserialize, Serialize};

use super::{SolverError, SparseMatrix};
use crate::runtime::Runtime;

/// Breakdown threshold of BiCGSTAB, applied to `rho` normalised by
/// `|r0|^2` so that it does not depend on the scale of the system.
pub const BREAKDOWN_THRESHOLD: f64 = 1e-30;

/// Largest `||K - K^T||_F / ||K||_F` accepted by CG when the matrix carries
/// no symmetry hint. Finite-difference tangents sit far below it.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Cg,
    Bicgstab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// True residual `|rhs - K x|` of the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    /// Turns a non-converged report into an error.
    pub fn require(&self, solver: &'static str, target: f64) -> Result<(), SolverError> {
        if self.converged {
            Ok(())
        } else {
            Err(SolverError::NotConverged {
                solver,
                iterations: self.iterations,
                residual: self.final_residual,
                target,
            })
        }
    }
}

pub fn solve(
    kind: SolverKind,
    k: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    max_iters: usize,
    rt: &Runtime,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    match kind {
        SolverKind::Cg => cg_solve(k, rhs, tol, max_iters, rt),
        SolverKind::Bicgstab => bicgstab_solve(k, rhs, tol, max_iters, rt),
    }
}

fn check(k: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<(), SolverError> {
    if !k.is_square() || rhs.len() != k.rows() {
        return Err(SolverError::DimensionMismatch {
            rows: k.rows(),
            cols: k.cols(),
            len: rhs.len(),
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SolverError::InvalidTolerance(tol));
    }
    Ok(())
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn true_residual(k: &SparseMatrix, x: &[f64], rhs: &[f64], rt: &Runtime) -> Result<Vec<f64>, SolverError> {
    let kx = k.spmv(x, rt)?;
    Ok(rhs.iter().zip(&kx).map(|(b, y)| b - y).collect())
}

/// Unpreconditioned conjugate gradients for symmetric positive definite `k`,
/// starting from zero. Converged means `|rhs - K x| <= tol |rhs|`.
pub fn cg_solve(
    k: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    max_iters: usize,
    rt: &Runtime,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    check(k, rhs, tol)?;
    let symmetric = k.symmetric_hint.unwrap_or_else(|| k.asymmetry() <= SYMMETRY_TOLERANCE);
    if !symmetric {
        return Err(SolverError::NotSymmetric);
    }
    let n = rhs.len();
    let target = tol * rt.norm(rhs);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut kp = vec![0.0; n];
    let mut rr = rt.dot(&r, &r);
    let mut iterations = 0;
    if rr.sqrt() <= target {
        return Ok((x, SolveReport { iterations, final_residual: rr.sqrt(), converged: true }));
    }
    while iterations < max_iters {
        k.spmv_into(&p, &mut kp, rt)?;
        let pkp = rt.dot(&p, &kp);
        if !(pkp > 0.0) {
            break;
        }
        let alpha = rr / pkp;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &kp);
        iterations += 1;
        let rr_new = rt.dot(&r, &r);
        if rr_new.sqrt() <= target {
            r = true_residual(k, &x, rhs, rt)?;
            let rr_true = rt.dot(&r, &r);
            if rr_true.sqrt() <= target {
                return Ok((x, SolveReport { iterations, final_residual: rr_true.sqrt(), converged: true }));
            }
            p.copy_from_slice(&r);
            rr = rr_true;
            continue;
        }
        let beta = rr_new / rr;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        rr = rr_new;
    }
    let final_residual = rt.norm(&true_residual(k, &x, rhs, rt)?);
    Ok((x, SolveReport { iterations, final_residual, converged: final_residual <= target }))
}

/// Unpreconditioned BiCGSTAB starting from zero.
pub fn bicgstab_solve(
    k: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    max_iters: usize,
    rt: &Runtime,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    check(k, rhs, tol)?;
    let n = rhs.len();
    let target = tol * rt.norm(rhs);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut iterations = 0;
    if rt.norm(&r) <= target {
        return Ok((x, SolveReport { iterations, final_residual: rt.norm(&r), converged: true }));
    }
    let mut r_hat = r.clone();
    let mut scale = rt.dot(&r_hat, &r_hat);
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut fresh = true;
    while iterations < max_iters {
        let rho_new = rt.dot(&r_hat, &r);
        if rho_new.abs() < BREAKDOWN_THRESHOLD * scale {
            return Err(SolverError::Breakdown { iteration: iterations, quantity: "rho", value: rho_new });
        }
        if fresh {
            p.copy_from_slice(&r);
            fresh = false;
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            for idx in 0..n {
                p[idx] = r[idx] + beta * (p[idx] - omega * v[idx]);
            }
        }
        rho = rho_new;
        k.spmv_into(&p, &mut v, rt)?;
        let rv = rt.dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(SolverError::Breakdown { iteration: iterations, quantity: "r_hat.v", value: rv });
        }
        alpha = rho / rv;
        for idx in 0..n {
            s[idx] = r[idx] - alpha * v[idx];
        }
        iterations += 1;
        if rt.norm(&s) <= target {
            axpy(&mut x, alpha, &p);
        } else {
            k.spmv_into(&s, &mut t, rt)?;
            let tt = rt.dot(&t, &t);
            if tt == 0.0 {
                return Err(SolverError::Breakdown { iteration: iterations, quantity: "t.t", value: tt });
            }
            omega = rt.dot(&t, &s) / tt;
            if omega == 0.0 {
                return Err(SolverError::Breakdown { iteration: iterations, quantity: "omega", value: omega });
            }
            for idx in 0..n {
                x[idx] += alpha * p[idx] + omega * s[idx];
                r[idx] = s[idx] - omega * t[idx];
            }
            if rt.norm(&r) > target {
                continue;
            }
        }
        r = true_residual(k, &x, rhs, rt)?;
        let res = rt.norm(&r);
        if res <= target {
            return Ok((x, SolveReport { iterations, final_residual: res, converged: true }));
        }
        // Restart from the true residual.
        r_hat.copy_from_slice(&r);
        scale = rt.dot(&r_hat, &r_hat);
        fresh = true;
    }
    let final_residual = rt.norm(&true_residual(k, &x, rhs, rt)?);
    Ok((x, SolveReport { iterations, final_residual, converged: final_residual <= target }))
}
