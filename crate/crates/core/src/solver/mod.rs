//! Time integration of the switching system and of its limit, plus a driver
//! that advances either one over a fixed output cadence.

pub mod cg;
pub mod full;
pub mod limit;

use std::ops::ControlFlow;

use crate::error::Result;
use crate::params::Params;
use crate::state::{StateFull, StateLimit};

pub use cg::CgSettings;
pub use full::{cfl_limit, exchange_relax, step_full, step_u_transport_diffusion, step_w};
pub use limit::{limit_from_full_ic, step_limit, step_limit_with_coefficient};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub cg: CgSettings,
    /// Abort once `max n` exceeds this. `None` disables the check.
    pub blowup_threshold: Option<f64>,
    /// Clamp each step to the drift CFL bound.
    pub adaptive: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cg: CgSettings::default(),
            blowup_threshold: None,
            adaptive: true,
        }
    }
}

/// Default abort level relative to the initial maximum density.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt_used: f64,
    pub cg_iters_u: usize,
    pub cg_iters_w: usize,
    pub max_n: f64,
    pub cfl_limit: f64,
}

/// A solver the driver can advance. `advance` takes at most `dt_cap` and
/// never checks the blowup threshold; the driver does.
pub trait Integrator: Sync {
    type State: Clone + Send;

    fn params(&self) -> &Params;
    fn options(&self) -> &SolverOptions;
    fn advance(&self, state: &Self::State, dt_cap: f64) -> Result<(Self::State, StepReport)>;
    fn time(state: &Self::State) -> f64;
    fn set_time(state: &mut Self::State, t: f64);
    fn max_n(state: &Self::State) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct FullSolver {
    pub params: Params,
    pub opts: SolverOptions,
}

impl Integrator for FullSolver {
    type State = StateFull;

    fn params(&self) -> &Params {
        &self.params
    }
    fn options(&self) -> &SolverOptions {
        &self.opts
    }
    fn advance(&self, state: &StateFull, dt_cap: f64) -> Result<(StateFull, StepReport)> {
        let cfl = full::cfl_limit(&state.w, 1.0, self.params.cfl_safety);
        let dt = full::choose_dt(cfl, &self.params, &self.opts, dt_cap);
        full::advance_full(state, &self.params, dt, cfl, &self.opts.cg)
    }
    fn time(state: &StateFull) -> f64 {
        state.t
    }
    fn set_time(state: &mut StateFull, t: f64) {
        state.t = t;
    }
    fn max_n(state: &StateFull) -> f64 {
        state.max_n()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LimitSolver {
    pub params: Params,
    pub opts: SolverOptions,
    /// Chemotactic/diffusive coefficient, normally `theta / (1 + theta)`.
    pub coef: f64,
}

impl LimitSolver {
    pub fn new(params: Params, opts: SolverOptions) -> Self {
        Self {
            params,
            opts,
            coef: params.limit_coefficient(),
        }
    }
}

impl Integrator for LimitSolver {
    type State = StateLimit;

    fn params(&self) -> &Params {
        &self.params
    }
    fn options(&self) -> &SolverOptions {
        &self.opts
    }
    fn advance(&self, state: &StateLimit, dt_cap: f64) -> Result<(StateLimit, StepReport)> {
        let cfl = full::cfl_limit(&state.w, self.coef, self.params.cfl_safety);
        let dt = full::choose_dt(cfl, &self.params, &self.opts, dt_cap);
        limit::advance_limit(state, &self.params, self.coef, dt, cfl, &self.opts.cg)
    }
    fn time(state: &StateLimit) -> f64 {
        state.t
    }
    fn set_time(state: &mut StateLimit, t: f64) {
        state.t = t;
    }
    fn max_n(state: &StateLimit) -> f64 {
        state.n.max()
    }
}

/// Recorded when a run stops on the blowup threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abort {
    pub t: f64,
    pub max_n: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary<S> {
    pub final_state: S,
    /// Completed nominal intervals of length `params.dt`.
    pub steps: usize,
    /// Actual solver steps, counting CFL subdivisions.
    pub substeps: usize,
    pub max_cg_iters: usize,
    pub min_dt: f64,
    pub abort: Option<Abort>,
    /// True when the tick callback asked to stop early.
    pub stopped: bool,
}

/// Advances `init` over `[t0, t0 + params.t_end]` in nominal intervals of
/// `params.dt`. Each interval ends exactly on its nominal time, subdividing
/// when the CFL bound is tighter. `on_tick(k, state)` runs at `k = 0` and
/// after every `diag_every`-th interval; returning `Break` stops the run.
///
/// Crossing the blowup threshold ends the run with `abort` set and the
/// offending state kept as `final_state`.
pub fn run<I, F>(solver: &I, init: I::State, mut on_tick: F) -> Result<RunSummary<I::State>>
where
    I: Integrator,
    F: FnMut(usize, &I::State) -> Result<ControlFlow<()>>,
{
    let params = *solver.params();
    let t0 = I::time(&init);
    let n_steps = params.n_steps();
    let mut state = init;
    let mut summary_substeps = 0;
    let mut max_cg = 0;
    let mut min_dt = f64::INFINITY;

    let done = |state, steps, substeps, max_cg, min_dt, abort, stopped| RunSummary {
        final_state: state,
        steps,
        substeps,
        max_cg_iters: max_cg,
        min_dt,
        abort,
        stopped,
    };

    if on_tick(0, &state)?.is_break() {
        return Ok(done(state, 0, 0, 0, min_dt, None, true));
    }
    for k in 1..=n_steps {
        let target = t0 + (k as f64 * params.dt).min(params.t_end);
        loop {
            let remaining = target - I::time(&state);
            if remaining <= 1e-12 * target.abs().max(1.0) {
                break;
            }
            let (next, report) = solver.advance(&state, remaining)?;
            state = next;
            summary_substeps += 1;
            max_cg = max_cg.max(report.cg_iters_u).max(report.cg_iters_w);
            min_dt = min_dt.min(report.dt_used);
            if let Some(threshold) = solver.options().blowup_threshold {
                if report.max_n > threshold {
                    let abort = Abort {
                        t: I::time(&state),
                        max_n: report.max_n,
                        threshold,
                    };
                    return Ok(done(state, k - 1, summary_substeps, max_cg, min_dt, Some(abort), false));
                }
            }
        }
        I::set_time(&mut state, target);
        if k % params.diag_every == 0 && on_tick(k, &state)?.is_break() {
            return Ok(done(state, k, summary_substeps, max_cg, min_dt, None, true));
        }
    }
    Ok(done(state, n_steps, summary_substeps, max_cg, min_dt, None, false))
}
