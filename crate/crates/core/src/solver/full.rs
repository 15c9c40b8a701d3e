//! Strang-split integrator for the switching system
//!
//! ```text
//! u_t = div(grad u - u grad w) + gamma (theta v - u)
//! v_t = gamma (u - theta v)
//! w_t = D Lap w - alpha w + v
//! ```
//!
//! One step is `exchange(dt/2) -> {transport/diffusion of u, implicit w with
//! v frozen} -> exchange(dt/2)`. The exchange is linear and solved in closed
//! form, so `gamma` never restricts `dt`.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::operators::{drift_divergence, gradient_faces};
use crate::params::Params;
use crate::solver::cg::{solve_helmholtz, CgSettings};
use crate::solver::{SolverOptions, StepReport};
use crate::state::StateFull;

/// Exact flow of `u' = gamma (theta v - u)`, `v' = gamma (u - theta v)` over
/// `dt`, cell by cell. `n = u + v` is invariant and `e = theta v - u` decays
/// by `exp(-gamma (1 + theta) dt)`.
pub fn exchange_relax(state: &StateFull, params: &Params, dt: f64) -> StateFull {
    let theta = params.theta;
    let decay = (-params.gamma * (1.0 + theta) * dt).exp();
    let grid = *state.grid();
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for (&uc, &vc) in state.u.values().iter().zip(state.v.values()) {
        let n = uc + vc;
        let e = (theta * vc - uc) * decay;
        let un = (theta * n - e) / (1.0 + theta);
        // v from n - u keeps u + v == n to the last bit where possible
        let vn = n - un;
        u.push(un);
        v.push(vn);
    }
    StateFull {
        t: state.t,
        u: Field::from_raw(grid, u),
        v: Field::from_raw(grid, v),
        w: state.w.clone(),
    }
}

/// Largest stable explicit drift step `cfl_safety * min(h) / (scale * max |grad w|)`.
/// Infinite when `w` is flat.
pub fn cfl_limit(w: &Field, velocity_scale: f64, cfl_safety: f64) -> f64 {
    let vmax = velocity_scale * gradient_faces(w).max_abs();
    if vmax > 0.0 {
        cfl_safety * w.grid().min_spacing() / vmax
    } else {
        f64::INFINITY
    }
}

/// IMEX update of `u_t = coef * div(grad u - u grad w)`: explicit upwind
/// drift, then `(I - dt coef Lap) u_new = u*`. Returns the CG iteration count.
pub(crate) fn transport_diffusion(
    u: &Field,
    w: &Field,
    coef: f64,
    dt: f64,
    cg: &CgSettings,
) -> Result<(Field, usize)> {
    u.same_grid(w)?;
    let grid = *u.grid();
    let drift = drift_divergence(u, w, coef);
    let rhs: Vec<f64> = u
        .values()
        .iter()
        .zip(drift.values())
        .map(|(a, b)| a + dt * b)
        .collect();
    let mut x = rhs.clone();
    let iters = solve_helmholtz(&grid, 1.0, dt * coef, &rhs, &mut x, cg)?;
    Ok((Field::from_raw(grid, x), iters))
}

/// Transport and diffusion substep of `u` with unit coefficients.
pub fn step_u_transport_diffusion(
    u: &Field,
    w: &Field,
    dt: f64,
    cg: &CgSettings,
) -> Result<(Field, usize)> {
    transport_diffusion(u, w, 1.0, dt, cg)
}

/// Backward Euler for `w_t = D Lap w - alpha w + source`.
pub(crate) fn implicit_w(
    w: &Field,
    source: &Field,
    d_w: f64,
    alpha: f64,
    source_scale: f64,
    dt: f64,
    cg: &CgSettings,
) -> Result<(Field, usize)> {
    w.same_grid(source)?;
    let grid = *w.grid();
    let rhs: Vec<f64> = w
        .values()
        .iter()
        .zip(source.values())
        .map(|(a, s)| a + dt * source_scale * s)
        .collect();
    let mut x = w.values().to_vec();
    let iters = solve_helmholtz(&grid, 1.0 + dt * alpha, dt * d_w, &rhs, &mut x, cg)?;
    Ok((Field::from_raw(grid, x), iters))
}

/// `(I + dt alpha - dt D Lap) w_new = w + dt v`.
pub fn step_w(
    w: &Field,
    v: &Field,
    params: &Params,
    dt: f64,
    cg: &CgSettings,
) -> Result<(Field, usize)> {
    implicit_w(w, v, params.d_w, params.alpha, 1.0, dt, cg)
}

/// One Strang step of length `dt` without the blowup check.
pub(crate) fn advance_full(
    state: &StateFull,
    params: &Params,
    dt: f64,
    cfl: f64,
    cg: &CgSettings,
) -> Result<(StateFull, StepReport)> {
    let half = exchange_relax(state, params, 0.5 * dt);
    let (u, cg_iters_u) = transport_diffusion(&half.u, &half.w, 1.0, dt, cg)?;
    let (w, cg_iters_w) = step_w(&half.w, &half.v, params, dt, cg)?;
    let mid = StateFull {
        t: state.t,
        u,
        v: half.v,
        w,
    };
    let mut out = exchange_relax(&mid, params, 0.5 * dt);
    out.t = state.t + dt;
    out.u.check_finite()?;
    out.v.check_finite()?;
    out.w.check_finite()?;
    let report = StepReport {
        dt_used: dt,
        cg_iters_u,
        cg_iters_w,
        max_n: out.max_n(),
        cfl_limit: cfl,
    };
    Ok((out, report))
}

/// Step length for the next step: `params.dt` and `dt_cap`, further limited
/// by the drift CFL bound when adaptive stepping is on.
pub(crate) fn choose_dt(cfl: f64, params: &Params, opts: &SolverOptions, dt_cap: f64) -> f64 {
    let dt = params.dt.min(dt_cap);
    if !opts.adaptive || cfl >= dt {
        return dt;
    }
    // Split what is left of the interval evenly instead of leaving a sliver.
    if dt_cap.is_finite() && dt_cap <= params.dt {
        dt_cap / (dt_cap / cfl).ceil()
    } else {
        cfl
    }
}

/// One step of the switching system. Aborts with [`Error::Blowup`] when
/// `max(u + v)` passes `opts.blowup_threshold`.
pub fn step_full(
    state: &StateFull,
    params: &Params,
    opts: &SolverOptions,
) -> Result<(StateFull, StepReport)> {
    let cfl = cfl_limit(&state.w, 1.0, params.cfl_safety);
    let dt = choose_dt(cfl, params, opts, f64::INFINITY);
    let (next, report) = advance_full(state, params, dt, cfl, &opts.cg)?;
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
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(g: Grid, rng: &mut ChaCha8Rng) -> StateFull {
        let mut f = |lo: f64, hi: f64| {
            Field::new(g, (0..g.len()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
        };
        let u = f(0.0, 3.0);
        let v = f(0.0, 3.0);
        let w = f(0.0, 1.0);
        StateFull::new(0.0, u, v, w).unwrap()
    }

    #[test]
    fn exchange_equilibrium_is_fixed() {
        let g = Grid::unit_square(6).unwrap();
        let params = Params { theta: 2.5, gamma: 40.0, ..Params::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = Field::new(g, (0..g.len()).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
        let u = v.map(|x| 2.5 * x).unwrap();
        let s = StateFull::new(0.0, u, v, Field::zeros(g)).unwrap();
        let out = exchange_relax(&s, &params, 0.3);
        for (a, b) in out.u.values().iter().zip(s.u.values()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        for (a, b) in out.v.values().iter().zip(s.v.values()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn exchange_closed_form() {
        let g = Grid::unit_square(2).unwrap();
        let params = Params { theta: 1.0, gamma: 10.0, ..Params::default() };
        let s = StateFull::new(
            0.0,
            Field::constant(g, 2.0),
            Field::constant(g, 1.0),
            Field::zeros(g),
        )
        .unwrap();
        let out = exchange_relax(&s, &params, 0.1);
        let em2 = (-2.0f64).exp();
        assert!((out.u.at(0, 0) - (3.0 + em2) / 2.0).abs() < 1e-15);
        assert!((out.v.at(1, 1) - (3.0 - em2) / 2.0).abs() < 1e-15);
        assert!((out.u.at(0, 0) - 1.5676676).abs() < 1e-7);
        assert!((out.v.at(0, 0) - 1.4323324).abs() < 1e-7);
    }

    #[test]
    fn exchange_conserves_n_and_composes() {
        let g = Grid::unit_square(8).unwrap();
        let params = Params { theta: 0.7, gamma: 123.0, ..Params::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_state(g, &mut rng);
        let full = exchange_relax(&s, &params, 0.01);
        let halves = exchange_relax(&exchange_relax(&s, &params, 0.005), &params, 0.005);
        for c in 0..g.len() {
            let n0 = s.u.values()[c] + s.v.values()[c];
            let n1 = full.u.values()[c] + full.v.values()[c];
            assert!((n1 - n0).abs() <= 1e-15 * n0.max(1.0) * 2.0);
            assert!((full.u.values()[c] - halves.u.values()[c]).abs() < 1e-14);
            assert!((full.v.values()[c] - halves.v.values()[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn pure_heat_step_when_w_flat() {
        let g = Grid::unit_square(10).unwrap();
        let w = Field::constant(g, 0.4);
        let cg = CgSettings::default();
        let (u, _) = step_u_transport_diffusion(&Field::constant(g, 2.0), &w, 0.01, &cg).unwrap();
        assert!(u.values().iter().all(|&x| (x - 2.0).abs() < 1e-13));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u0 = Field::new(g, (0..g.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let (u1, _) = step_u_transport_diffusion(&u0, &w, 0.01, &cg).unwrap();
        // backward Euler heat step: (u1 - u0)/dt = Lap u1
        let lap = crate::operators::laplacian_neumann(&u1);
        for c in 0..g.len() {
            let lhs = (u1.values()[c] - u0.values()[c]) / 0.01;
            assert!((lhs - lap.values()[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn transport_conserves_mass() {
        let g = Grid::unit_square(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_state(g, &mut rng);
        let cfl = cfl_limit(&s.w, 1.0, 0.25);
        let (u, _) = step_u_transport_diffusion(&s.u, &s.w, cfl.min(0.01), &CgSettings::default()).unwrap();
        let m0 = integrate(&s.u);
        assert!((integrate(&u) - m0).abs() <= 1e-12 * m0);
        assert!(u.min() >= 0.0);
    }

    #[test]
    fn step_w_homogeneous_ode() {
        let g = Grid::unit_square(4).unwrap();
        let params = Params { alpha: 1.0, ..Params::default() };
        let v = Field::constant(g, 1.0);
        let mut w = Field::zeros(g);
        let dt = 1e-3;
        for _ in 0..1000 {
            w = step_w(&w, &v, &params, dt, &CgSettings::default()).unwrap().0;
        }
        let exact = 1.0 - (-1.0f64).exp();
        assert!((w.at(2, 1) - exact).abs() < 5e-4);
        assert!((exact - 0.6321206).abs() < 1e-7);
    }

    #[test]
    fn step_w_steady_balance() {
        let g = Grid::unit_square(5).unwrap();
        let params = Params { alpha: 2.0, ..Params::default() };
        let w = Field::constant(g, 0.75);
        let v = Field::constant(g, 1.5);
        let (out, _) = step_w(&w, &v, &params, 0.1, &CgSettings::default()).unwrap();
        assert!(out.values().iter().all(|&x| (x - 0.75).abs() < 1e-14));
    }

    #[test]
    fn step_w_keeps_non_negative() {
        let g = Grid::unit_square(12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for trial in 0..40 {
            // sparse spikes are the hardest case for sign preservation
            let w = Field::new(
                g,
                (0..g.len())
                    .map(|_| if rng.gen_bool(0.1) { rng.gen_range(0.0..5.0) } else { 0.0 })
                    .collect(),
            )
            .unwrap();
            let v = Field::new(g, (0..g.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
            let params = Params {
                d_w: rng.gen_range(0.1..10.0),
                alpha: rng.gen_range(0.1..10.0),
                ..Params::default()
            };
            let dt = [1e-4, 1e-3, 1e-2, 0.1][trial % 4];
            let (out, _) = step_w(&w, &v, &params, dt, &CgSettings::default()).unwrap();
            let scale = w.max().max(1.0);
            assert!(out.min() >= -1e-10 * scale, "min {}", out.min());
        }
    }

    #[test]
    fn homogeneous_steady_state_is_fixed() {
        let g = Grid::unit_square(8).unwrap();
        let params = Params { theta: 2.0, alpha: 0.5, gamma: 1e3, ..Params::default() };
        let vbar = 1.3;
        let mut s = StateFull::new(
            0.0,
            Field::constant(g, params.theta * vbar),
            Field::constant(g, vbar),
            Field::constant(g, vbar / params.alpha),
        )
        .unwrap();
        let opts = SolverOptions::default();
        for _ in 0..20 {
            let (next, report) = step_full(&s, &params, &opts).unwrap();
            assert_eq!(report.dt_used, params.dt);
            for (a, b) in next.u.values().iter().zip(s.u.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
            for (a, b) in next.w.values().iter().zip(s.w.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
            s = next;
        }
    }

    #[test]
    fn step_full_conserves_total_mass_and_sign() {
        let g = Grid::unit_square(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut s = random_state(g, &mut rng);
        let params = Params { gamma: 50.0, dt: 0.01, ..Params::default() };
        let opts = SolverOptions::default();
        let m0 = integrate(&s.u) + integrate(&s.v);
        for _ in 0..10 {
            let (next, report) = step_full(&s, &params, &opts).unwrap();
            assert!(report.dt_used <= report.cfl_limit);
            let m = integrate(&next.u) + integrate(&next.v);
            assert!((m - m0).abs() <= 1e-12 * m0);
            next.check_non_negative().unwrap();
            s = next;
        }
    }

    #[test]
    fn frozen_pde_exchange_decay_rate() {
        // with u = c theta-split plus a flat w, only the exchange acts on e
        let g = Grid::unit_square(4).unwrap();
        let params = Params { theta: 1.0, gamma: 10.0, alpha: 1.0, dt: 0.1, ..Params::default() };
        let s = StateFull::new(
            0.0,
            Field::constant(g, 2.0),
            Field::constant(g, 1.0),
            Field::constant(g, 1.0),
        )
        .unwrap();
        let (next, _) = step_full(&s, &params, &SolverOptions::default()).unwrap();
        let e0 = norm_l2_sq(&crate::functionals::exchange_deficit(&s, 1.0).unwrap()).sqrt();
        let e1 = norm_l2_sq(&crate::functionals::exchange_deficit(&next, 1.0).unwrap()).sqrt();
        assert!(((e1 / e0) - (-2.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn blowup_threshold_aborts() {
        let g = Grid::unit_square(4).unwrap();
        let s = StateFull::new(
            0.0,
            Field::constant(g, 1.0),
            Field::constant(g, 1.0),
            Field::zeros(g),
        )
        .unwrap();
        let opts = SolverOptions { blowup_threshold: Some(1.5), ..SolverOptions::default() };
        let err = step_full(&s, &Params::default(), &opts).unwrap_err();
        assert!(matches!(err, Error::Blowup { .. }));
    }
}
