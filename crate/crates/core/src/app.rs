//! Command-line modes: load a configuration, build the initial data, run,
//! and write CSV, snapshots and a manifest into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiments::{
    limit_trajectory, rescale_check, run_blowup_probe, run_gamma_sweep, BlowupConfig, SweepConfig, SweepMode,
};
use crate::functionals::{diag_full, diag_limit, random_smooth_field, FunctionalConfig};
use crate::grid::{integrate, Field, Grid};
use crate::initial::gaussian_density;
use crate::io::csv::{self, DiagWriter};
use crate::io::snapshot::{read_snapshot_on, snapshot_path, write_snapshot};
use crate::io::{parse_config_for, InitialCondition, Mode, RunConfig};
use crate::params::Params;
use crate::solver::{run, Abort, FullSolver, LimitSolver, SolverOptions};
use crate::state::{StateFull, StateLimit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

/// What went wrong, by phase.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid configuration or initial data.
    Config(Error),
    /// The solver stopped: blowup threshold, CG failure, non-finite state.
    Solver(Error),
    /// Output could not be written.
    Io(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_) => EXIT_ABORT,
            Failure::Io(_) => EXIT_IO,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            Failure::Config(e) | Failure::Solver(e) | Failure::Io(e) => e,
        }
    }

    fn running(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Snapshot { .. } => Failure::Io(e),
            other => Failure::Solver(other),
        }
    }
}

/// A finished mode: where its files went and a few `key = value` facts.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub summary: Vec<(String, String)>,
    /// Set when a run or sweep stopped on the blowup threshold.
    pub abort: Option<Abort>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.abort.is_some() {
            EXIT_ABORT
        } else {
            EXIT_OK
        }
    }
}

/// Reads and validates a configuration file for `mode`; `out` replaces the
/// configured output directory. Relative snapshot paths in `[ic]` resolve
/// against the configuration file's directory.
pub fn load_config(mode: Mode, path: &Path, out: Option<PathBuf>) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = parse_config_for(&text, Some(mode))?;
    let base = path.parent().unwrap_or(Path::new(""));
    if let InitialCondition::FromFile { path, w_path } = &mut cfg.ic {
        *path = base.join(&*path);
        if let Some(w) = w_path {
            *w = base.join(&*w);
        }
    }
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    Ok(cfg)
}

fn load_field(path: &Path, grid: &Grid) -> Result<Field> {
    let (f, _) = read_snapshot_on(path, grid.lx(), grid.ly())?;
    if (f.grid().nx(), f.grid().ny()) != (grid.nx(), grid.ny()) {
        return Err(Error::Config {
            line: None,
            message: format!(
                "{} is {}x{}, the grid is {}x{}",
                path.display(),
                f.grid().nx(),
                f.grid().ny(),
                grid.nx(),
                grid.ny()
            ),
        });
    }
    Ok(f)
}

/// `(n0, w0)` for a configuration. The seed only matters when
/// `perturbation > 0`.
pub fn initial_data(cfg: &RunConfig, seed: u64) -> Result<(Field, Field)> {
    let grid = cfg.grid;
    let (n0, w0) = match &cfg.ic {
        InitialCondition::Gaussian {
            center,
            width,
            mass,
            floor,
        } => (gaussian_density(grid, *center, *width, *mass, *floor)?, Field::zeros(grid)),
        InitialCondition::Constant { value } => (Field::constant(grid, *value), Field::zeros(grid)),
        InitialCondition::Cosine { mean, amplitude } => {
            let (lx, ly) = (grid.lx(), grid.ly());
            let pi = std::f64::consts::PI;
            let n0 = Field::from_fn(grid, |x, y| mean * (1.0 + amplitude * (pi * x / lx).cos() * (pi * y / ly).cos()))?;
            (n0, Field::zeros(grid))
        }
        InitialCondition::FromFile { path, w_path } => {
            let n0 = load_field(path, &grid)?;
            let w0 = match w_path {
                Some(p) => load_field(p, &grid)?,
                None => Field::zeros(grid),
            };
            (n0, w0)
        }
    };
    n0.check_non_negative()?;
    w0.check_non_negative()?;
    let n0 = if cfg.perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_smooth_field(grid, 4, 1.0, &mut rng);
        let scale = cfg.perturbation / phi.max().abs().max(phi.min().abs()).max(f64::MIN_POSITIVE);
        let mass = integrate(&n0);
        let values = n0.values().iter().zip(phi.values()).map(|(n, p)| n * (1.0 + scale * p)).collect();
        let bumped = Field::new(grid, values)?;
        let m = integrate(&bumped);
        if m > 0.0 {
            bumped.map(|x| x * mass / m)?
        } else {
            bumped
        }
    } else {
        n0
    };
    Ok((n0, w0))
}

/// Loads, runs and reports one mode. Prints a short summary on success.
pub fn run_cli(mode: Mode, config: &Path, out: Option<PathBuf>, seed: u64) -> i32 {
    let result = load_config(mode, config, out)
        .map_err(Failure::Config)
        .and_then(|cfg| execute(&cfg, seed));
    match result {
        Ok(outcome) => {
            for (k, v) in &outcome.summary {
                println!("{k} = {v}");
            }
            outcome.exit_code()
        }
        Err(f) => {
            eprintln!("chemoswitch: {}", f.error());
            f.exit_code()
        }
    }
}

/// Runs a validated configuration.
pub fn execute(cfg: &RunConfig, seed: u64) -> std::result::Result<Outcome, Failure> {
    let (n0, w0) = initial_data(cfg, seed).map_err(Failure::Config)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Failure::Io(e.into()))?;
    let mut outcome = match cfg.mode {
        Mode::RunFull => run_full_mode(cfg, n0, w0),
        Mode::RunLimit => run_limit_mode(cfg, n0, w0),
        Mode::GammaSweep => sweep_mode(cfg, n0, w0),
        Mode::BlowupProbe => probe_mode(cfg, n0, w0),
        Mode::RescaleCheck => rescale_mode(cfg, n0, w0),
    }?;
    outcome.out_dir = cfg.out_dir.clone();
    write_manifest(cfg, seed, &outcome).map_err(Failure::Io)?;
    Ok(outcome)
}

fn write_manifest(cfg: &RunConfig, seed: u64, outcome: &Outcome) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# chemoswitch {} manifest", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# seed = {seed}");
    let _ = writeln!(s, "# log_floor = {:?}", FunctionalConfig::default().log_floor);
    s += &cfg.to_config_text();
    let _ = writeln!(s);
    for (k, v) in &outcome.summary {
        let _ = writeln!(s, "# {k} = {v}");
    }
    csv::write_text(&cfg.out_dir.join("manifest.txt"), &s)
}

fn solver_options(cfg: &RunConfig, n0: &Field) -> SolverOptions {
    SolverOptions {
        blowup_threshold: Some(cfg.blowup.threshold(n0.max())),
        ..SolverOptions::default()
    }
}

fn snapshot_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.join("snapshots");
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_summary_lines(steps: usize, substeps: usize, rows: usize, abort: &Option<Abort>) -> Vec<(String, String)> {
    let mut v = vec![
        ("status".to_string(), if abort.is_some() { "aborted" } else { "completed" }.to_string()),
        ("steps".to_string(), steps.to_string()),
        ("substeps".to_string(), substeps.to_string()),
        ("diag_rows".to_string(), rows.to_string()),
    ];
    if let Some(a) = abort {
        v.push(("abort_t".into(), csv::fmt_real(a.t)));
        v.push(("abort_max_n".into(), csv::fmt_real(a.max_n)));
        v.push(("abort_threshold".into(), csv::fmt_real(a.threshold)));
    }
    v
}

fn run_full_mode(cfg: &RunConfig, n0: Field, w0: Field) -> std::result::Result<Outcome, Failure> {
    let params = cfg.params;
    let solver = FullSolver {
        params,
        opts: solver_options(cfg, &n0),
    };
    let init = StateFull::equilibrated(0.0, &n0, w0, params.theta).map_err(Failure::Config)?;
    let fcfg = FunctionalConfig::default();
    let mut diag = DiagWriter::create(&cfg.out_dir.join("diag.csv")).map_err(Failure::Io)?;
    let snaps = (cfg.snapshot_every > 0).then(|| snapshot_dir(cfg)).transpose().map_err(Failure::Io)?;
    let save = |dir: &Path, k: usize, s: &StateFull| -> Result<()> {
        write_snapshot(&s.u, s.t, &snapshot_path(dir, "u", k))?;
        write_snapshot(&s.v, s.t, &snapshot_path(dir, "v", k))?;
        write_snapshot(&s.w, s.t, &snapshot_path(dir, "w", k))
    };
    let summary = run(&solver, init, |k, s| {
        diag.append(&diag_full(s, &params, &fcfg)?)?;
        if let Some(dir) = &snaps {
            if k % cfg.snapshot_every == 0 {
                save(dir, k, s)?;
            }
        }
        Ok(ControlFlow::Continue(()))
    })
    .map_err(Failure::running)?;
    let rows = diag.rows();
    diag.finish().map_err(Failure::Io)?;
    if summary.abort.is_some() {
        let dir = snapshot_dir(cfg).map_err(Failure::Io)?;
        save(&dir, summary.steps + 1, &summary.final_state).map_err(Failure::Io)?;
    }
    Ok(Outcome {
        out_dir: PathBuf::new(),
        summary: run_summary_lines(summary.steps, summary.substeps, rows, &summary.abort),
        abort: summary.abort,
    })
}

fn run_limit_mode(cfg: &RunConfig, n0: Field, w0: Field) -> std::result::Result<Outcome, Failure> {
    let params = cfg.params;
    let solver = LimitSolver::new(params, solver_options(cfg, &n0));
    let init = StateLimit::new(0.0, n0, w0).map_err(Failure::Config)?;
    let fcfg = FunctionalConfig::default();
    let mut diag = DiagWriter::create(&cfg.out_dir.join("diag.csv")).map_err(Failure::Io)?;
    let snaps = (cfg.snapshot_every > 0).then(|| snapshot_dir(cfg)).transpose().map_err(Failure::Io)?;
    let save = |dir: &Path, k: usize, s: &StateLimit| -> Result<()> {
        write_snapshot(&s.n, s.t, &snapshot_path(dir, "n", k))?;
        write_snapshot(&s.w, s.t, &snapshot_path(dir, "w", k))
    };
    let summary = run(&solver, init, |k, s| {
        diag.append(&diag_limit(s, &params, &fcfg)?)?;
        if let Some(dir) = &snaps {
            if k % cfg.snapshot_every == 0 {
                save(dir, k, s)?;
            }
        }
        Ok(ControlFlow::Continue(()))
    })
    .map_err(Failure::running)?;
    let rows = diag.rows();
    diag.finish().map_err(Failure::Io)?;
    if summary.abort.is_some() {
        let dir = snapshot_dir(cfg).map_err(Failure::Io)?;
        save(&dir, summary.steps + 1, &summary.final_state).map_err(Failure::Io)?;
    }
    Ok(Outcome {
        out_dir: PathBuf::new(),
        summary: run_summary_lines(summary.steps, summary.substeps, rows, &summary.abort),
        abort: summary.abort,
    })
}

/// The sweep configuration a `gamma-sweep` run uses.
pub fn sweep_config(cfg: &RunConfig, n0: Field, w0: Field) -> SweepConfig {
    SweepConfig {
        params: cfg.params,
        gammas: cfg.gammas.clone(),
        opts: solver_options(cfg, &n0),
        n0,
        w0,
        mode: if cfg.self_compare {
            SweepMode::SelfCompare
        } else {
            SweepMode::Full
        },
    }
}

fn sweep_mode(cfg: &RunConfig, n0: Field, w0: Field) -> std::result::Result<Outcome, Failure> {
    let report = run_gamma_sweep(&sweep_config(cfg, n0, w0)).map_err(Failure::running)?;
    csv::write_text(&cfg.out_dir.join("sweep.csv"), &csv::sweep_csv(&report)).map_err(Failure::Io)?;
    csv::write_text(&cfg.out_dir.join("sweep_summary.csv"), &csv::sweep_summary_csv(&report)).map_err(Failure::Io)?;
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
    Ok(Outcome {
        out_dir: PathBuf::new(),
        summary: vec![
            ("status".into(), "completed".into()),
            ("gammas".into(), list(&report.gammas)),
            ("err_n_l2t".into(), list(&report.err_n_l2t)),
            ("err_w_w12_sup".into(), list(&report.err_w_w12_sup)),
            ("err_e_l2t".into(), list(&report.err_e_l2t)),
            ("fitted_order".into(), csv::fmt_real(report.fitted_order)),
        ],
        abort: None,
    })
}

/// The probe configuration a `blowup-probe` run uses.
pub fn probe_config(cfg: &RunConfig, n0: Field, w0: Field) -> BlowupConfig {
    BlowupConfig {
        params: cfg.params,
        n0,
        w0,
        gammas: cfg.gammas.clone(),
        horizon_factor: cfg.horizon_factor,
        cg: Default::default(),
    }
}

fn probe_mode(cfg: &RunConfig, n0: Field, w0: Field) -> std::result::Result<Outcome, Failure> {
    let report = run_blowup_probe(&probe_config(cfg, n0, w0)).map_err(Failure::running)?;
    csv::write_text(&cfg.out_dir.join("blowup.csv"), &csv::blowup_csv(&report)).map_err(Failure::Io)?;
    csv::write_text(&cfg.out_dir.join("blowup_summary.csv"), &csv::blowup_summary_csv(&report))
        .map_err(Failure::Io)?;
    let saturation = match report.t_saturation {
        Some(t) => format!("saturated at t = {t:.6e} (discrete proxy for blowup)"),
        None => "no saturation".to_string(),
    };
    Ok(Outcome {
        out_dir: PathBuf::new(),
        summary: vec![
            ("status".into(), "completed".into()),
            ("mass_over_crit".into(), format!("{:.6}", report.mass / report.crit)),
            ("saturation".into(), saturation),
            ("max_linf_n".into(), csv::fmt_real(report.max_linf_n)),
        ],
        abort: None,
    })
}

/// Limit trajectories at `dt` and `dt / 2`, both sampled every
/// `diag_every` steps, each checked against the rescaled system.
pub fn rescale_refinement(
    params: &Params,
    n0: &Field,
    w0: &Field,
    s_step: Option<f64>,
) -> Result<Vec<(f64, crate::experiments::RescaleReport)>> {
    let mut out = Vec::new();
    for dt in [params.dt, 0.5 * params.dt] {
        let p = Params { dt, ..*params };
        let init = StateLimit::new(0.0, n0.clone(), w0.clone())?;
        let trajectory = limit_trajectory(&p, &SolverOptions::default(), init)?;
        out.push((dt, rescale_check(&trajectory, &p, s_step)?));
    }
    Ok(out)
}

fn rescale_mode(cfg: &RunConfig, n0: Field, w0: Field) -> std::result::Result<Outcome, Failure> {
    let runs = rescale_refinement(&cfg.params, &n0, &w0, cfg.s_step).map_err(|e| match e {
        Error::CadenceMismatch(_) => Failure::Config(e),
        other => Failure::running(other),
    })?;
    csv::write_text(&cfg.out_dir.join("rescale.csv"), &csv::rescale_csv(&runs)).map_err(Failure::Io)?;
    let ratio = runs[0].1.max_residual() / runs[1].1.max_residual();
    Ok(Outcome {
        out_dir: PathBuf::new(),
        summary: vec![
            ("status".into(), "completed".into()),
            ("max_residual".into(), csv::fmt_real(runs[0].1.max_residual())),
            ("max_residual_half_dt".into(), csv::fmt_real(runs[1].1.max_residual())),
            ("refinement_ratio".into(), format!("{ratio:.6}")),
        ],
        abort: None,
    })
}
