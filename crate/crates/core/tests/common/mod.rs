#![allow(dead_code)]

use chemoswitch::{Field, Grid};
use rand::Rng;

/// Dense matrix of the Neumann five-point Laplacian, assembled cell by cell
/// from neighbor couplings.
pub fn dense_laplacian(g: &Grid) -> Vec<Vec<f64>> {
    let (nx, ny) = (g.nx(), g.ny());
    let n = nx * ny;
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut a = vec![vec![0.0; n]; n];
    for j in 0..ny {
        for i in 0..nx {
            let p = i + nx * j;
            let mut couple = |q: usize, c: f64| {
                a[p][q] += c;
                a[p][p] -= c;
            };
            if i > 0 {
                couple(p - 1, cx);
            }
            if i + 1 < nx {
                couple(p + 1, cx);
            }
            if j > 0 {
                couple(p - nx, cy);
            }
            if j + 1 < ny {
                couple(p + nx, cy);
            }
        }
    }
    a
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

/// `div(grad u - u grad w)` summed per cell over its existing neighbors,
/// upwinding `u` along the drift from the cell toward each neighbor.
pub fn brute_force_chemotaxis(u: &Field, w: &Field) -> Vec<f64> {
    let g = u.grid();
    let (nx, ny) = (g.nx() as i64, g.ny() as i64);
    let mut out = vec![0.0; u.values().len()];
    for j in 0..ny {
        for i in 0..nx {
            let p = (i + nx * j) as usize;
            let mut acc = 0.0;
            for (di, dj, h) in [(1, 0, g.hx()), (-1, 0, g.hx()), (0, 1, g.hy()), (0, -1, g.hy())] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= nx || b >= ny {
                    continue;
                }
                let q = (a + nx * b) as usize;
                let (up, uq) = (u.values()[p], u.values()[q]);
                let speed = (w.values()[q] - w.values()[p]) / h;
                let carried = if speed > 0.0 { up } else { uq };
                acc += ((uq - up) / h - speed * carried) / h;
            }
            out[p] = acc;
        }
    }
    out
}

pub fn random_field<R: Rng>(g: Grid, lo: f64, hi: f64, rng: &mut R) -> Field {
    Field::new(g, (0..g.len()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Discrete Neumann eigenvalue of the 1-D second difference for mode `k`.
pub fn cosine_eigenvalue(k: usize, h: f64, l: f64) -> f64 {
    -(2.0 / (h * h)) * (1.0 - (k as f64 * std::f64::consts::PI * h / l).cos())
}

/// Rows of a diagnostics CSV as numbers, header checked.
pub fn read_diag(path: &std::path::Path) -> Vec<[f64; 13]> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(chemoswitch::DiagRecord::HEADER));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            v.try_into().unwrap()
        })
        .collect()
}
