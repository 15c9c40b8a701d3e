//! Uniform cell-centered grid on the rectangle `[0, lx] x [0, ly]` and the
//! scalar fields that live on it.
//!
//! Storage is row-major with cell `(i, j)` at index `i + nx * j`; `i` runs
//! along x. All quadrature is the midpoint rule over cells.

use crate::error::{Error, Result};
use crate::operators;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

/// Builds a grid, rejecting fewer than two cells per direction or a
/// non-positive side length.
pub fn make_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
    Grid::new(nx, ny, lx, ly)
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per direction, got {nx} x {ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn min_spacing(&self) -> f64 {
        self.hx.min(self.hy)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }
    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }

    /// Number of x-normal faces, boundary faces included.
    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    /// Number of y-normal faces, boundary faces included.
    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }
}

/// Cell-centered scalar on a [`Grid`]. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    /// Wraps values produced by internal kernels. Callers guarantee length;
    /// finiteness is checked at the solver boundary instead.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        assert!(c.is_finite(), "constant field value must be finite");
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y_center(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x_center(i), y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.values)
    }

    pub fn check_non_negative(&self) -> Result<()> {
        match self.values.iter().position(|&x| x < 0.0) {
            Some(index) => Err(Error::Negative {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cellwise `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Field::new(self.grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&x| f(x)).collect())
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Midpoint-rule integral: `cell_area * sum(values)`.
pub fn integrate(f: &Field) -> f64 {
    f.grid.cell_area() * f.values.iter().sum::<f64>()
}

pub(crate) fn integrate_with(grid: &Grid, values: impl Iterator<Item = f64>) -> f64 {
    grid.cell_area() * values.sum::<f64>()
}

/// `(integral |f|^p)^(1/p)` for `p >= 1`.
pub fn norm_lp(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::param("p", format!("need finite p >= 1, got {p}")));
    }
    if p == 2.0 {
        return Ok(norm_l2_sq(f).sqrt());
    }
    if p == 1.0 {
        return Ok(integrate_with(&f.grid, f.values.iter().map(|x| x.abs())));
    }
    Ok(integrate_with(&f.grid, f.values.iter().map(|x| x.abs().powf(p))).powf(1.0 / p))
}

/// `integral f^2`, the square of the L2 norm.
pub fn norm_l2_sq(f: &Field) -> f64 {
    integrate_with(&f.grid, f.values.iter().map(|x| x * x))
}

pub fn norm_linf(f: &Field) -> f64 {
    f.values.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `sqrt(||f||_2^2 + ||grad f||_2^2)` with the face gradient of
/// [`operators::gradient_faces`].
pub fn norm_w12(f: &Field) -> f64 {
    (norm_l2_sq(f) + operators::gradient_norm_sq(f)).sqrt()
}
