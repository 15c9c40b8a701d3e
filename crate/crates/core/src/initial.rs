//! Initial densities.

use crate::error::{Error, Result};
use crate::grid::{integrate, Field, Grid};

/// Relative vacuum floor added to Gaussian data, as a fraction of the mean.
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Gaussian bump `exp(-|x - c|^2 / (2 width^2))` clipped at 0, lifted by
/// `floor * mean`, then scaled so its discrete integral equals `mass`.
pub fn gaussian_density(grid: Grid, center: (f64, f64), width: f64, mass: f64, floor: f64) -> Result<Field> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::param("width", format!("must be positive, got {width}")));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::param("mass", format!("must be positive, got {mass}")));
    }
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::param("floor", format!("must be non-negative, got {floor}")));
    }
    let two_var = 2.0 * width * width;
    let bump = Field::from_fn(grid, |x, y| {
        let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        (-r2 / two_var).exp().max(0.0)
    })?;
    let raw_mass = integrate(&bump);
    if raw_mass <= 0.0 {
        return Err(Error::param("width", "Gaussian underflows on this grid"));
    }
    let lift = floor * raw_mass / grid.area();
    let lifted = bump.map(|x| x + lift)?;
    let scale = mass / integrate(&lifted);
    lifted.map(|x| x * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_has_target_mass_and_floor() {
        let g = Grid::unit_square(64).unwrap();
        let f = gaussian_density(g, (0.5, 0.5), 0.05, 12.0, DEFAULT_FLOOR).unwrap();
        assert!((integrate(&f) - 12.0).abs() < 1e-12 * 12.0);
        assert!(f.min() > 0.0);
        let mean = 12.0;
        assert!(f.min() > 0.99e-8 * mean && f.min() < 1.01e-8 * mean);
        let peak = f.at(31, 31).max(f.at(32, 32));
        assert_eq!(peak, f.max());
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid::unit_square(8).unwrap();
        assert!(gaussian_density(g, (0.5, 0.5), 0.0, 1.0, 0.0).is_err());
        assert!(gaussian_density(g, (0.5, 0.5), 0.1, -1.0, 0.0).is_err());
        assert!(gaussian_density(g, (0.5, 0.5), 0.1, 1.0, -1.0).is_err());
    }
}
