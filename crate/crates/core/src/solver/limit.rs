//! Integrator for the limit Keller-Segel system
//!
//! ```text
//! n_t = k div(grad n - n grad w),    k = theta / (1 + theta)
//! w_t = D Lap w - alpha w + n / (1 + theta)
//! ```
//!
//! built from the same substeps as the switching solver.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::params::Params;
use crate::solver::cg::CgSettings;
use crate::solver::full::{cfl_limit, choose_dt, implicit_w, transport_diffusion};
use crate::solver::{SolverOptions, StepReport};
use crate::state::StateLimit;

/// `n0 = u0 + v0` paired with the shared `w0`.
pub fn limit_from_full_ic(u0: &Field, v0: &Field, w0: &Field) -> Result<StateLimit> {
    let n = u0.lin_comb(1.0, v0, 1.0)?;
    StateLimit::new(0.0, n, w0.clone())
}

pub(crate) fn advance_limit(
    state: &StateLimit,
    params: &Params,
    coef: f64,
    dt: f64,
    cfl: f64,
    cg: &CgSettings,
) -> Result<(StateLimit, StepReport)> {
    let (n, cg_iters_u) = transport_diffusion(&state.n, &state.w, coef, dt, cg)?;
    let (w, cg_iters_w) = implicit_w(
        &state.w,
        &state.n,
        params.d_w,
        params.alpha,
        1.0 / (1.0 + params.theta),
        dt,
        cg,
    )?;
    n.check_finite()?;
    w.check_finite()?;
    let max_n = n.max();
    let out = StateLimit { t: state.t + dt, n, w };
    let report = StepReport {
        dt_used: dt,
        cg_iters_u,
        cg_iters_w,
        max_n,
        cfl_limit: cfl,
    };
    Ok((out, report))
}

/// One IMEX step of the limit system with chemotactic and diffusive
/// coefficient `theta / (1 + theta)`.
pub fn step_limit(
    state: &StateLimit,
    params: &Params,
    opts: &SolverOptions,
) -> Result<(StateLimit, StepReport)> {
    step_limit_with_coefficient(state, params, params.limit_coefficient(), opts)
}

/// As [`step_limit`] with an explicit chemotactic/diffusive coefficient.
pub fn step_limit_with_coefficient(
    state: &StateLimit,
    params: &Params,
    coef: f64,
    opts: &SolverOptions,
) -> Result<(StateLimit, StepReport)> {
    let cfl = cfl_limit(&state.w, coef, params.cfl_safety);
    let dt = choose_dt(cfl, params, opts, f64::INFINITY);
    let (next, report) = advance_limit(state, params, coef, dt, cfl, &opts.cg)?;
    if let Some(threshold) = opts.blowup_threshold {
        if report.max_n > threshold {
            return Err(Error::Blowup {
                t: next.t,
                max_n: report.max_n,
                threshold,
            });
        }
    }
    Ok((next, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, norm_l2_sq, Grid};
    use std::f64::consts::PI;

    fn bump(g: Grid) -> Field {
        Field::from_fn(g, |x, y| {
            1.0 + 0.5 * (PI * x).cos() * (2.0 * PI * y).cos() + (-((x - 0.3).powi(2) + (y - 0.6).powi(2)) / 0.02).exp()
        })
        .unwrap()
    }

    #[test]
    fn initial_data_sums_phenotypes() {
        let g = Grid::unit_square(6).unwrap();
        let z = Field::zeros(g);
        let s = limit_from_full_ic(&z, &z, &z).unwrap();
        assert!(s.n.values().iter().all(|&x| x == 0.0));

        let s = limit_from_full_ic(&Field::constant(g, 1.0), &Field::constant(g, 2.0), &z).unwrap();
        assert!(s.n.values().iter().all(|&x| x == 3.0));

        let u = bump(g);
        let v = u.map(|x| 0.3 * x * x).unwrap();
        let s = limit_from_full_ic(&u, &v, &z).unwrap();
        assert!((integrate(&s.n) - integrate(&u) - integrate(&v)).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_steady_state_is_fixed() {
        let g = Grid::unit_square(8).unwrap();
        let params = Params { theta: 3.0, alpha: 0.5, ..Params::default() };
        let nbar = 2.0;
        let mut s = StateLimit::new(
            0.0,
            Field::constant(g, nbar),
            Field::constant(g, nbar / (params.alpha * (1.0 + params.theta))),
        )
        .unwrap();
        for _ in 0..20 {
            let (next, _) = step_limit(&s, &params, &SolverOptions::default()).unwrap();
            for (a, b) in next.n.values().iter().zip(s.n.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
            for (a, b) in next.w.values().iter().zip(s.w.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
            s = next;
        }
    }

    #[test]
    fn conserves_mass() {
        let g = Grid::unit_square(24).unwrap();
        let params = Params { dt: 5e-3, ..Params::default() };
        let mut s = StateLimit::new(0.0, bump(g), bump(g).map(|x| 0.5 * x).unwrap()).unwrap();
        let m0 = integrate(&s.n);
        for _ in 0..10 {
            s = step_limit(&s, &params, &SolverOptions::default()).unwrap().0;
            assert!((integrate(&s.n) - m0).abs() <= 1e-12 * m0);
            s.check_non_negative().unwrap();
        }
    }

    #[test]
    fn large_theta_matches_unit_coefficient() {
        let g = Grid::unit_square(16).unwrap();
        let params = Params { theta: 1e6, dt: 1e-3, ..Params::default() };
        let s = StateLimit::new(0.0, bump(g), bump(g).map(|x| 0.2 * x).unwrap()).unwrap();
        let opts = SolverOptions::default();
        let (a, _) = step_limit(&s, &params, &opts).unwrap();
        let (b, _) = step_limit_with_coefficient(&s, &params, 1.0, &opts).unwrap();
        let diff = a.n.lin_comb(1.0, &b.n, -1.0).unwrap();
        let rel = (norm_l2_sq(&diff) / norm_l2_sq(&b.n)).sqrt();
        assert!(rel < 1e-5, "{rel}");
    }
}
