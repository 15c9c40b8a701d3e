use crate::error::{Error, Result};

/// Physical constants and time-stepping configuration.
///
/// `d_w` is the chemoattractant diffusivity, `alpha` its decay rate, `theta`
/// the equilibrium ratio `u = theta * v` of the switching exchange, `gamma`
/// the switching rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub d_w: f64,
    pub alpha: f64,
    pub theta: f64,
    pub gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub diag_every: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            d_w: 1.0,
            alpha: 1.0,
            theta: 1.0,
            gamma: 100.0,
            dt: 1e-3,
            t_end: 1.0,
            cfl_safety: 0.25,
            diag_every: 10,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        positive("d_w", self.d_w)?;
        positive("alpha", self.alpha)?;
        positive("theta", self.theta)?;
        positive("gamma", self.gamma)?;
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::param(
                "cfl_safety",
                format!("must lie in (0, 1], got {}", self.cfl_safety),
            ));
        }
        if self.diag_every == 0 {
            return Err(Error::param("diag_every", "must be a positive integer"));
        }
        Ok(())
    }

    /// Chemotactic coefficient `theta / (1 + theta)` of the limit system.
    pub fn limit_coefficient(&self) -> f64 {
        self.theta / (1.0 + self.theta)
    }

    /// Number of nominal `dt` intervals covering `[0, t_end]`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {x}")))
    }
}
