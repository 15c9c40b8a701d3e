//! Flux-form spatial operators with no-flux (homogeneous Neumann) boundaries.
//!
//! Every operator here is the discrete divergence of a face flux. Interior
//! faces carry a difference quotient; boundary faces carry exactly zero, so
//! the cell sums telescope and the integral of every output vanishes.
//!
//! Face layout: x-normal face `(k, j)` with `k in 0..=nx` sits between cells
//! `k - 1` and `k` of row `j`, stored at `k + (nx + 1) * j`. y-normal face
//! `(i, k)` with `k in 0..=ny` sits between rows `k - 1` and `k`, stored at
//! `i + nx * k`.

use crate::grid::{Field, Grid};

/// Normal components on every cell face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxes {
    pub grid: Grid,
    /// x-normal faces, length `(nx + 1) * ny`.
    pub fx: Vec<f64>,
    /// y-normal faces, length `nx * (ny + 1)`.
    pub fy: Vec<f64>,
}

impl FaceFluxes {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            fx: vec![0.0; grid.n_xfaces()],
            fy: vec![0.0; grid.n_yfaces()],
        }
    }

    #[inline]
    pub fn xface(&self, k: usize, j: usize) -> f64 {
        self.fx[k + (self.grid.nx() + 1) * j]
    }

    #[inline]
    pub fn yface(&self, i: usize, k: usize) -> f64 {
        self.fy[i + self.grid.nx() * k]
    }

    /// Largest absolute face value.
    pub fn max_abs(&self) -> f64 {
        self.fx
            .iter()
            .chain(&self.fy)
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    /// Cellwise divergence `(F_e - F_w) / hx + (F_n - F_s) / hy`.
    pub fn divergence(&self) -> Field {
        let mut out = vec![0.0; self.grid.len()];
        self.divergence_into(&mut out);
        Field::from_raw(self.grid, out)
    }

    pub(crate) fn divergence_into(&self, out: &mut [f64]) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let (hx, hy) = (g.hx(), g.hy());
        for j in 0..ny {
            for i in 0..nx {
                let west = self.fx[i + (nx + 1) * j];
                let east = self.fx[i + 1 + (nx + 1) * j];
                let south = self.fy[i + nx * j];
                let north = self.fy[i + nx * (j + 1)];
                out[i + nx * j] = (east - west) / hx + (north - south) / hy;
            }
        }
    }
}

/// Face gradient: interior faces hold `(right - left) / h`, boundary faces 0.
pub fn gradient_faces(f: &Field) -> FaceFluxes {
    let g = *f.grid();
    let mut faces = FaceFluxes::zeros(g);
    gradient_into(&g, f.values(), &mut faces.fx, &mut faces.fy);
    faces
}

pub(crate) fn gradient_into(g: &Grid, f: &[f64], fx: &mut [f64], fy: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    for j in 0..ny {
        let row = nx * j;
        let frow = (nx + 1) * j;
        fx[frow] = 0.0;
        fx[frow + nx] = 0.0;
        for k in 1..nx {
            fx[frow + k] = (f[row + k] - f[row + k - 1]) / hx;
        }
    }
    fy[..nx].fill(0.0);
    fy[nx * ny..].fill(0.0);
    for k in 1..ny {
        for i in 0..nx {
            fy[i + nx * k] = (f[i + nx * k] - f[i + nx * (k - 1)]) / hy;
        }
    }
}

/// Discrete `||grad f||_2^2`: squared interior face gradients, each weighted
/// by one cell area.
pub fn gradient_norm_sq(f: &Field) -> f64 {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let v = f.values();
    let mut sx = 0.0;
    for j in 0..ny {
        for k in 1..nx {
            let d = (v[k + nx * j] - v[k - 1 + nx * j]) / hx;
            sx += d * d;
        }
    }
    let mut sy = 0.0;
    for k in 1..ny {
        for i in 0..nx {
            let d = (v[i + nx * k] - v[i + nx * (k - 1)]) / hy;
            sy += d * d;
        }
    }
    (sx + sy) * g.cell_area()
}

/// Five-point Neumann Laplacian in flux form.
pub fn laplacian_neumann(f: &Field) -> Field {
    let g = *f.grid();
    let mut out = vec![0.0; g.len()];
    laplacian_into(&g, f.values(), &mut out);
    Field::from_raw(g, out)
}

pub(crate) fn laplacian_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    helmholtz_into(g, 0.0, -1.0, f, out);
}

/// `out = shift * f - coef * Lap(f)`, the operator of every implicit solve.
///
/// Each cell combines its face differences as `(d_e - d_w) / h^2`; boundary
/// differences are zero.
pub(crate) fn helmholtz_into(g: &Grid, shift: f64, coef: f64, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let cx = coef / (g.hx() * g.hx());
    let cy = coef / (g.hy() * g.hy());
    for j in 0..ny {
        let row = &f[nx * j..nx * (j + 1)];
        let orow = &mut out[nx * j..nx * (j + 1)];
        // vertical differences first, then horizontal, so the interior loop
        // carries no boundary tests
        match (j > 0, j + 1 < ny) {
            (true, true) => {
                let below = &f[nx * (j - 1)..nx * j];
                let above = &f[nx * (j + 1)..nx * (j + 2)];
                for i in 0..nx {
                    let fc = row[i];
                    orow[i] = cy * ((above[i] - fc) - (fc - below[i]));
                }
            }
            (false, true) => {
                let above = &f[nx * (j + 1)..nx * (j + 2)];
                for i in 0..nx {
                    orow[i] = cy * (above[i] - row[i]);
                }
            }
            (true, false) => {
                let below = &f[nx * (j - 1)..nx * j];
                for i in 0..nx {
                    orow[i] = -cy * (row[i] - below[i]);
                }
            }
            (false, false) => orow.fill(0.0),
        }
        orow[0] = shift * row[0] - (cx * (row[1] - row[0]) + orow[0]);
        for i in 1..nx - 1 {
            let fc = row[i];
            orow[i] = shift * fc - (cx * ((row[i + 1] - fc) - (fc - row[i - 1])) + orow[i]);
        }
        let l = nx - 1;
        orow[l] = shift * row[l] - (cx * (-(row[l] - row[l - 1])) + orow[l]);
    }
}

/// Diagonal of `shift * I - coef * Lap`, for Jacobi preconditioning.
pub(crate) fn helmholtz_diagonal(g: &Grid, shift: f64, coef: f64) -> Vec<f64> {
    let (nx, ny) = (g.nx(), g.ny());
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut d = Vec::with_capacity(g.len());
    for j in 0..ny {
        let ny_faces = (j > 0) as u8 + (j + 1 < ny) as u8;
        for i in 0..nx {
            let nx_faces = (i > 0) as u8 + (i + 1 < nx) as u8;
            d.push(shift + coef * (nx_faces as f64 * ihx2 + ny_faces as f64 * ihy2));
        }
    }
    d
}

/// Upwind drift flux `scale * u_up * grad w` on every face, where `u_up` is
/// the cell value on the side the drift comes from (velocity `+scale grad w`).
pub fn drift_fluxes(u: &Field, w: &Field, scale: f64) -> FaceFluxes {
    let grad = gradient_faces(w);
    upwind_with_gradient(u, &grad, scale)
}

pub(crate) fn upwind_with_gradient(u: &Field, grad: &FaceFluxes, scale: f64) -> FaceFluxes {
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let uv = u.values();
    let mut out = FaceFluxes::zeros(g);
    for j in 0..ny {
        for k in 1..nx {
            let f = k + (nx + 1) * j;
            let a = scale * grad.fx[f];
            let up = if a > 0.0 { uv[k - 1 + nx * j] } else { uv[k + nx * j] };
            out.fx[f] = a * up;
        }
    }
    for k in 1..ny {
        for i in 0..nx {
            let f = i + nx * k;
            let a = scale * grad.fy[f];
            let up = if a > 0.0 { uv[i + nx * (k - 1)] } else { uv[i + nx * k] };
            out.fy[f] = a * up;
        }
    }
    out
}

/// Explicit advective part `-div(scale * u_up * grad w)`.
pub fn drift_divergence(u: &Field, w: &Field, scale: f64) -> Field {
    let mut div = drift_fluxes(u, w, scale).divergence();
    div.values_mut().iter_mut().for_each(|x| *x = -*x);
    div
}

/// `div(grad u - u_up grad w)` with first-order upwinding of `u` along the
/// face drift `grad w`.
pub fn chemotactic_divergence(u: &Field, w: &Field) -> Field {
    let mut flux = gradient_faces(u);
    let drift = drift_fluxes(u, w, 1.0);
    flux.fx.iter_mut().zip(&drift.fx).for_each(|(f, d)| *f -= d);
    flux.fy.iter_mut().zip(&drift.fy).for_each(|(f, d)| *f -= d);
    flux.divergence()
}
