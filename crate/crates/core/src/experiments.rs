//! Scripted studies: convergence in the switching rate, the critical-mass
//! dichotomy and blowup probe, and the residual check of the rescaled
//! unit-coefficient system.

use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{critical_mass, diag_limit, FunctionalConfig};
use crate::grid::{norm_l2_sq, norm_w12, Field, Grid};
use crate::initial::{gaussian_density, DEFAULT_FLOOR};
use crate::operators::{chemotactic_divergence, gradient_norm_sq, laplacian_neumann};
use crate::params::Params;
use crate::solver::{run, FullSolver, LimitSolver, SolverOptions, DEFAULT_BLOWUP_FACTOR};
use crate::state::{StateFull, StateLimit};

/// Switching rates of the default sweep.
pub const DEFAULT_SWEEP_GAMMAS: [f64; 5] = [1.0, 10.0, 1e2, 1e3, 1e4];
/// Switching rates of the default blowup probe.
pub const DEFAULT_PROBE_GAMMAS: [f64; 4] = [1.0, 10.0, 1e2, 1e3];
/// Saturation means `max n` reaching this multiple of its initial value.
pub const SATURATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Switching solver at each rate against the limit reference.
    Full,
    /// Limit solver against itself; every error must vanish.
    SelfCompare,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// `gamma` is ignored; rates come from `gammas`.
    pub params: Params,
    pub gammas: Vec<f64>,
    pub n0: Field,
    pub w0: Field,
    pub opts: SolverOptions,
    pub mode: SweepMode,
}

impl SweepConfig {
    /// Gaussian `n0` of width 0.1 at the domain center with half the
    /// critical mass, `w0 = 0`, and the default rate list.
    pub fn subcritical(grid: Grid, params: Params) -> Result<Self> {
        let center = (0.5 * grid.lx(), 0.5 * grid.ly());
        let n0 = gaussian_density(grid, center, 0.1, 0.5 * critical_mass(&params), DEFAULT_FLOOR)?;
        let opts = SolverOptions {
            blowup_threshold: Some(DEFAULT_BLOWUP_FACTOR * n0.max()),
            ..SolverOptions::default()
        };
        Ok(Self {
            params,
            gammas: DEFAULT_SWEEP_GAMMAS.to_vec(),
            n0,
            w0: Field::zeros(grid),
            opts,
            mode: SweepMode::Full,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub gammas: Vec<f64>,
    /// Trapezoid in time of `||n_gamma - n||_2^2`.
    pub err_n_l2t: Vec<f64>,
    /// Largest `||w_gamma - w||_{W^1_2}` over the saved times.
    pub err_w_w12_sup: Vec<f64>,
    /// Trapezoid in time of `||theta v - u||_2^2`.
    pub err_e_l2t: Vec<f64>,
    /// Least-squares slope of `ln err_n_l2t` against `ln gamma`; NaN with
    /// fewer than two positive errors.
    pub fitted_order: f64,
    /// Smallest `C` with `L >= (crit - M) / (8 pi) ||grad w||^2 - C` along
    /// the reference run.
    pub liapunov_floor_constant: f64,
    pub times: Vec<f64>,
}

struct Sample {
    t: f64,
    n: Field,
    w: Field,
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

fn blowup_error<S>(summary: &crate::solver::RunSummary<S>) -> Result<()> {
    match summary.abort {
        Some(a) => Err(Error::Blowup {
            t: a.t,
            max_n: a.max_n,
            threshold: a.threshold,
        }),
        None => Ok(()),
    }
}

/// Limit reference once, then one run per rate (in parallel), compared at
/// every diagnostic tick.
pub fn run_gamma_sweep(config: &SweepConfig) -> Result<SweepReport> {
    let params = config.params;
    params.validate()?;
    if config.gammas.is_empty() {
        return Err(Error::param("gammas", "must not be empty"));
    }
    if let Some(&g) = config.gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::param("gammas", format!("must be positive, got {g}")));
    }
    config.n0.same_grid(&config.w0)?;
    config.n0.check_non_negative()?;
    config.w0.check_non_negative()?;

    let init = StateLimit::new(0.0, config.n0.clone(), config.w0.clone())?;
    let reference = run_limit_samples(&params, &config.opts, init)?;
    let times: Vec<f64> = reference.iter().map(|s| s.t).collect();

    let mass: f64 = crate::grid::integrate(&config.n0);
    let slope = (critical_mass(&params) - mass) / (8.0 * std::f64::consts::PI);
    let cfg = FunctionalConfig::default();
    let mut floor_c = f64::NEG_INFINITY;
    for s in &reference {
        let state = StateLimit::new(s.t, s.n.clone(), s.w.clone())?;
        let l = diag_limit(&state, &params, &cfg)?.liapunov;
        floor_c = floor_c.max(slope * gradient_norm_sq(&s.w) - l);
    }

    let per_gamma: Vec<(f64, f64, f64)> = config
        .gammas
        .par_iter()
        .map(|&gamma| compare_one(config, gamma, &reference))
        .collect::<Result<_>>()?;

    let err_n_l2t: Vec<f64> = per_gamma.iter().map(|e| e.0).collect();
    let fitted_order = least_squares_slope(&config.gammas, &err_n_l2t);
    Ok(SweepReport {
        gammas: config.gammas.clone(),
        err_n_l2t,
        err_w_w12_sup: per_gamma.iter().map(|e| e.1).collect(),
        err_e_l2t: per_gamma.iter().map(|e| e.2).collect(),
        fitted_order,
        liapunov_floor_constant: floor_c,
        times,
    })
}

fn run_limit_samples(params: &Params, opts: &SolverOptions, init: StateLimit) -> Result<Vec<Sample>> {
    let solver = LimitSolver::new(*params, *opts);
    let mut out = Vec::new();
    let summary = run(&solver, init, |_, s| {
        out.push(Sample {
            t: s.t,
            n: s.n.clone(),
            w: s.w.clone(),
        });
        Ok(ControlFlow::Continue(()))
    })?;
    blowup_error(&summary)?;
    Ok(out)
}

fn compare_one(config: &SweepConfig, gamma: f64, reference: &[Sample]) -> Result<(f64, f64, f64)> {
    let params = Params { gamma, ..config.params };
    let mut dn = Vec::with_capacity(reference.len());
    let mut dw: f64 = 0.0;
    let mut de = Vec::with_capacity(reference.len());
    let mut tick = 0;
    let mut record = |t: f64, n: &Field, w: &Field, e_sq: f64| -> Result<()> {
        let r = reference
            .get(tick)
            .filter(|r| (r.t - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::CadenceMismatch(format!("no reference sample for t = {t}")))?;
        dn.push(norm_l2_sq(&n.lin_comb(1.0, &r.n, -1.0)?));
        dw = dw.max(norm_w12(&w.lin_comb(1.0, &r.w, -1.0)?));
        de.push(e_sq);
        tick += 1;
        Ok(())
    };

    match config.mode {
        SweepMode::Full => {
            let init = StateFull::equilibrated(0.0, &config.n0, config.w0.clone(), params.theta)?;
            let solver = FullSolver { params, opts: config.opts };
            let summary = run(&solver, init, |_, s| {
                let n = s.u.lin_comb(1.0, &s.v, 1.0)?;
                let e = s.v.lin_comb(params.theta, &s.u, -1.0)?;
                record(s.t, &n, &s.w, norm_l2_sq(&e))?;
                Ok(ControlFlow::Continue(()))
            })?;
            blowup_error(&summary)?;
        }
        SweepMode::SelfCompare => {
            let init = StateLimit::new(0.0, config.n0.clone(), config.w0.clone())?;
            let solver = LimitSolver::new(params, config.opts);
            let summary = run(&solver, init, |_, s| {
                record(s.t, &s.n, &s.w, 0.0)?;
                Ok(ControlFlow::Continue(()))
            })?;
            blowup_error(&summary)?;
        }
    }
    if dn.len() != reference.len() {
        return Err(Error::CadenceMismatch(format!(
            "{} samples against {} reference samples",
            dn.len(),
            reference.len()
        )));
    }
    let times: Vec<f64> = reference.iter().map(|s| s.t).collect();
    Ok((trapezoid(&times, &dn), dw, trapezoid(&times, &de)))
}

#[derive(Debug, Clone)]
pub struct BlowupConfig {
    /// `gamma` is ignored; `t_end` bounds the limit run.
    pub params: Params,
    pub n0: Field,
    pub w0: Field,
    pub gammas: Vec<f64>,
    /// Full runs cover `[0, horizon_factor * t_saturation]`, or `t_end`
    /// when the limit run never saturates.
    pub horizon_factor: f64,
    pub cg: crate::solver::CgSettings,
}

impl BlowupConfig {
    /// Gaussian of width 0.05 and mass `mass_factor * crit`, centered on the
    /// midpoint of the bottom edge, `w0 = 0`, and the default rate list.
    pub fn boundary_gaussian(grid: Grid, params: Params, mass_factor: f64) -> Result<Self> {
        let center = (0.5 * grid.lx(), 0.0);
        let n0 = gaussian_density(grid, center, 0.05, mass_factor * critical_mass(&params), DEFAULT_FLOOR)?;
        Ok(Self {
            params,
            w0: Field::zeros(grid),
            n0,
            gammas: DEFAULT_PROBE_GAMMAS.to_vec(),
            horizon_factor: 1.25,
            cg: Default::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub mass: f64,
    pub crit: f64,
    pub initial_linf_n: f64,
    /// First time `max n` reached `SATURATION_FACTOR` times its initial
    /// value in the limit run. A fixed-grid proxy for the blowup time.
    pub t_saturation: Option<f64>,
    pub max_linf_n: f64,
    /// Length of the interval the full runs were asked to cover.
    pub horizon: f64,
    pub gammas: Vec<f64>,
    pub sup_l2_u: Vec<f64>,
    pub sup_l2_v: Vec<f64>,
    /// Saturation time of each full run, if any.
    pub t_saturation_full: Vec<Option<f64>>,
}

/// Limit run until saturation or `t_end`, then full runs per rate over a
/// horizon past the saturation time. Every run stops at saturation.
pub fn run_blowup_probe(config: &BlowupConfig) -> Result<BlowupReport> {
    let params = config.params;
    params.validate()?;
    if !(config.horizon_factor >= 1.0 && config.horizon_factor.is_finite()) {
        return Err(Error::param("horizon_factor", "must be at least 1"));
    }
    config.n0.check_non_negative()?;
    config.w0.check_non_negative()?;
    config.n0.same_grid(&config.w0)?;
    let initial = config.n0.max();
    if !(initial > 0.0) {
        return Err(Error::ZeroField);
    }
    let opts = SolverOptions {
        cg: config.cg,
        blowup_threshold: Some(SATURATION_FACTOR * initial),
        adaptive: true,
    };
    let sampled = Params { diag_every: 1, ..params };

    let mut max_linf = initial;
    let init = StateLimit::new(0.0, config.n0.clone(), config.w0.clone())?;
    let summary = run(&LimitSolver::new(sampled, opts), init, |_, s| {
        max_linf = max_linf.max(s.n.max());
        Ok(ControlFlow::Continue(()))
    })?;
    let t_saturation = summary.abort.map(|a| a.t);
    if let Some(a) = summary.abort {
        max_linf = max_linf.max(a.max_n);
    }

    let horizon = match t_saturation {
        Some(t) => {
            let steps = (config.horizon_factor * t / params.dt).ceil().max(1.0);
            steps * params.dt
        }
        None => params.t_end,
    };

    let per_gamma: Vec<(f64, f64, Option<f64>)> = config
        .gammas
        .par_iter()
        .map(|&gamma| {
            let p = Params { gamma, t_end: horizon, ..sampled };
            let init = StateFull::equilibrated(0.0, &config.n0, config.w0.clone(), p.theta)?;
            let mut su: f64 = 0.0;
            let mut sv: f64 = 0.0;
            let summary = run(&FullSolver { params: p, opts }, init, |_, s| {
                su = su.max(norm_l2_sq(&s.u).sqrt());
                sv = sv.max(norm_l2_sq(&s.v).sqrt());
                Ok(ControlFlow::Continue(()))
            })?;
            let last = &summary.final_state;
            su = su.max(norm_l2_sq(&last.u).sqrt());
            sv = sv.max(norm_l2_sq(&last.v).sqrt());
            Ok((su, sv, summary.abort.map(|a| a.t)))
        })
        .collect::<Result<_>>()?;

    Ok(BlowupReport {
        mass: crate::grid::integrate(&config.n0),
        crit: critical_mass(&params),
        initial_linf_n: initial,
        t_saturation,
        max_linf_n: max_linf,
        horizon,
        gammas: config.gammas.clone(),
        sup_l2_u: per_gamma.iter().map(|r| r.0).collect(),
        sup_l2_v: per_gamma.iter().map(|r| r.1).collect(),
        t_saturation_full: per_gamma.iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaleReport {
    /// Step of the rescaled time `s`.
    pub s_step: f64,
    /// Rescaled times at which residuals were evaluated.
    pub s_times: Vec<f64>,
    /// `||U_s - div(grad U - U grad V)||_2` per evaluation time.
    pub residual_u: Vec<f64>,
    /// `||c V_s - (Lap V - (alpha / D) V + c U)||_2`, `c = theta / ((1 + theta) D)`.
    pub residual_v: Vec<f64>,
    pub max_residual_u: f64,
    pub max_residual_v: f64,
}

impl RescaleReport {
    pub fn max_residual(&self) -> f64 {
        self.max_residual_u.max(self.max_residual_v)
    }
}

/// Maps a limit trajectory with uniform spacing to the unit-coefficient
/// variables `U(s) = n(t) / theta`, `V(s) = w(t)`, `t = (1 + theta) s / theta`,
/// and evaluates both equations with centered differences in `s`.
///
/// `s_step` defaults to one snapshot spacing in `t`; any other value must
/// map to a whole number of spacings.
pub fn rescale_check(trajectory: &[StateLimit], params: &Params, s_step: Option<f64>) -> Result<RescaleReport> {
    params.validate()?;
    if trajectory.len() < 3 {
        return Err(Error::CadenceMismatch(format!(
            "need at least 3 snapshots, got {}",
            trajectory.len()
        )));
    }
    let spacing = trajectory[1].t - trajectory[0].t;
    if !(spacing > 0.0) {
        return Err(Error::CadenceMismatch("snapshot times must increase".into()));
    }
    let tol = 1e-9 * spacing;
    for (k, s) in trajectory.iter().enumerate() {
        if (s.t - trajectory[0].t - k as f64 * spacing).abs() > tol * (k as f64).max(1.0) {
            return Err(Error::CadenceMismatch(format!("snapshot {k} at t = {} breaks the uniform spacing", s.t)));
        }
        s.n.same_grid(&trajectory[0].n)?;
    }
    let theta = params.theta;
    let t_per_s = (1.0 + theta) / theta;
    let s_step = s_step.unwrap_or(spacing / t_per_s);
    let stride_f = s_step * t_per_s / spacing;
    let stride = stride_f.round();
    if !(stride >= 1.0) || (stride_f - stride).abs() > 1e-9 * stride {
        return Err(Error::CadenceMismatch(format!(
            "s step {s_step} maps to {stride_f} snapshot spacings, not a whole number"
        )));
    }
    let stride = stride as usize;
    if trajectory.len() <= 2 * stride {
        return Err(Error::CadenceMismatch("trajectory too short for the requested s step".into()));
    }

    let c = theta / ((1.0 + theta) * params.d_w);
    let a_over_d = params.alpha / params.d_w;
    let big_u = |k: usize| trajectory[k].n.map(|x| x / theta);
    let mut s_times = Vec::new();
    let mut residual_u = Vec::new();
    let mut residual_v = Vec::new();
    for k in stride..trajectory.len() - stride {
        let (prev, next) = (k - stride, k + stride);
        let u = big_u(k)?;
        let v = &trajectory[k].w;
        let du = big_u(next)?.lin_comb(1.0 / (2.0 * s_step), &big_u(prev)?, -1.0 / (2.0 * s_step))?;
        let ru = du.lin_comb(1.0, &chemotactic_divergence(&u, v), -1.0)?;
        let dv = trajectory[next]
            .w
            .lin_comb(c / (2.0 * s_step), &trajectory[prev].w, -c / (2.0 * s_step))?;
        let rhs_v = laplacian_neumann(v)
            .lin_comb(1.0, v, -a_over_d)?
            .lin_comb(1.0, &u, c)?;
        let rv = dv.lin_comb(1.0, &rhs_v, -1.0)?;
        s_times.push((trajectory[k].t - trajectory[0].t) / t_per_s);
        residual_u.push(norm_l2_sq(&ru).sqrt());
        residual_v.push(norm_l2_sq(&rv).sqrt());
    }
    let max_of = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(RescaleReport {
        s_step,
        max_residual_u: max_of(&residual_u),
        max_residual_v: max_of(&residual_v),
        s_times,
        residual_u,
        residual_v,
    })
}

/// Limit trajectory sampled every `params.diag_every` steps, for
/// [`rescale_check`].
pub fn limit_trajectory(params: &Params, opts: &SolverOptions, init: StateLimit) -> Result<Vec<StateLimit>> {
    let mut out = Vec::new();
    let summary = run(&LimitSolver::new(*params, *opts), init, |_, s| {
        out.push(s.clone());
        Ok(ControlFlow::Continue(()))
    })?;
    blowup_error(&summary)?;
    Ok(out)
}
