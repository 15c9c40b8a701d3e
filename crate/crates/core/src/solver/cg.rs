//! Jacobi-preconditioned conjugate gradient for `(shift I - coef Lap) x = b`
//! with the Neumann Laplacian.
//!
//! The operator maps constants to `shift` times themselves, so after the
//! Krylov iteration the residual's mean is removed by a constant shift of
//! `x`. This keeps `sum(x) = sum(b) / shift` to rounding, independent of the
//! stopping tolerance, which is what exact discrete mass balance needs.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operators::{helmholtz_diagonal, helmholtz_into};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Stop when `||b - A x||_2 <= rel_tol * ||b||_2`.
    pub rel_tol: f64,
    /// Iteration cap is `max_iter_factor * nx * ny`.
    pub max_iter_factor: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter_factor: 10,
        }
    }
}

/// Solves `(shift I - coef Lap) x = b` in place; `x` holds the initial guess
/// on entry. Returns the iteration count.
pub fn solve_helmholtz(
    grid: &Grid,
    shift: f64,
    coef: f64,
    b: &[f64],
    x: &mut [f64],
    settings: &CgSettings,
) -> Result<usize> {
    debug_assert!(shift > 0.0 && coef >= 0.0);
    let n = grid.len();
    let max_iter = settings.max_iter_factor * n;
    let inv_diag: Vec<f64> = helmholtz_diagonal(grid, shift, coef).iter().map(|d| 1.0 / d).collect();

    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let target = settings.rel_tol * b_norm;

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    helmholtz_into(grid, shift, coef, x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res_norm = dot(&r, &r).sqrt();

    let mut iters = 0;
    while res_norm > target {
        if iters >= max_iter {
            return Err(Error::CgNotConverged {
                iterations: iters,
                residual: res_norm / b_norm,
            });
        }
        helmholtz_into(grid, shift, coef, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged {
                iterations: iters,
                residual: res_norm / b_norm,
            });
        }
        let alpha = rz / pap;
        // four-lane accumulators break the floating-point add chain; the
        // lane order is fixed, so results stay bit-reproducible
        let mut rz_acc = [0.0; 4];
        let mut rr_acc = [0.0; 4];
        let lanes = x
            .chunks_exact_mut(4)
            .zip(r.chunks_exact_mut(4))
            .zip(z.chunks_exact_mut(4))
            .zip(p.chunks_exact(4).zip(ap.chunks_exact(4)).zip(inv_diag.chunks_exact(4)));
        for (((xc, rc), zc), ((pc, apc), dc)) in lanes {
            for l in 0..4 {
                xc[l] += alpha * pc[l];
                let rk = rc[l] - alpha * apc[l];
                let zk = rk * dc[l];
                rc[l] = rk;
                zc[l] = zk;
                rz_acc[l] += rk * zk;
                rr_acc[l] += rk * rk;
            }
        }
        for k in n - n % 4..n {
            x[k] += alpha * p[k];
            let rk = r[k] - alpha * ap[k];
            let zk = rk * inv_diag[k];
            r[k] = rk;
            z[k] = zk;
            rz_acc[0] += rk * zk;
            rr_acc[0] += rk * rk;
        }
        let rz_new = lanes_sum(rz_acc);
        let rr = lanes_sum(rr_acc);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pk, zk) in p.iter_mut().zip(&z) {
            *pk = zk + beta * *pk;
        }
        res_norm = rr.sqrt();
        iters += 1;
    }

    // Constant-mode correction: Lap telescopes, so sum(A x) = shift * sum(x)
    // and shifting x by a constant fixes the residual's mean exactly.
    // Summing pointwise differences avoids cancelling two large totals.
    let defect: f64 = b.iter().zip(x.iter()).map(|(bk, xk)| bk - shift * xk).sum();
    let c = defect / (shift * n as f64);
    x.iter_mut().for_each(|xi| *xi += c);
    Ok(iters)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for l in 0..4 {
            acc[l] += ca[l] * cb[l];
        }
    }
    lanes_sum(acc) + tail
}

#[inline]
fn lanes_sum(acc: [f64; 4]) -> f64 {
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}
