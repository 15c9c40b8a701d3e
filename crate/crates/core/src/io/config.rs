//! Plain `key = value` run configuration.
//!
//! ```text
//! mode = run-full          # optional; the command line mode wins
//!
//! [params]
//! gamma = 100
//! dt = 1e-3
//!
//! [grid]
//! nx = 128
//!
//! [ic]
//! kind = gaussian
//! mass_factor = 0.5
//! ```
//!
//! `#` starts a comment. Unknown keys, duplicate keys and keys that do not
//! apply to the chosen mode or initial-condition kind are errors.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::{DEFAULT_PROBE_GAMMAS, DEFAULT_SWEEP_GAMMAS};
use crate::grid::Grid;
use crate::params::Params;
use crate::solver::DEFAULT_BLOWUP_FACTOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    RunFull,
    RunLimit,
    GammaSweep,
    BlowupProbe,
    RescaleCheck,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::RunFull,
        Mode::RunLimit,
        Mode::GammaSweep,
        Mode::BlowupProbe,
        Mode::RescaleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::RunFull => "run-full",
            Mode::RunLimit => "run-limit",
            Mode::GammaSweep => "gamma-sweep",
            Mode::BlowupProbe => "blowup-probe",
            Mode::RescaleCheck => "rescale-check",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Bump normalized to `mass`, lifted by `floor` times its mean.
    Gaussian {
        center: (f64, f64),
        width: f64,
        mass: f64,
        floor: f64,
    },
    Constant { value: f64 },
    /// `mean * (1 + amplitude cos(pi x / lx) cos(pi y / ly))`.
    Cosine { mean: f64, amplitude: f64 },
    /// Density `n0` from a snapshot file, optional `w0` likewise.
    FromFile { path: PathBuf, w_path: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// For modes other than run-full, `gamma` keeps its default and is unused.
    pub params: Params,
    pub grid: Grid,
    pub ic: InitialCondition,
    /// Relative amplitude of a seeded smooth multiplicative perturbation of
    /// `n0`; 0 disables it.
    pub perturbation: f64,
    pub out_dir: PathBuf,
    /// Snapshot every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub gammas: Vec<f64>,
    pub blowup: BlowupRule,
    pub horizon_factor: f64,
    pub self_compare: bool,
    pub s_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowupRule {
    /// Abort above this multiple of the initial `max n`.
    Factor(f64),
    Absolute(f64),
}

impl BlowupRule {
    pub fn threshold(self, initial_max: f64) -> f64 {
        match self {
            BlowupRule::Factor(f) => f * initial_max,
            BlowupRule::Absolute(t) => t,
        }
    }
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("", &["mode"]),
    (
        "params",
        &["d_w", "alpha", "theta", "gamma", "dt", "t_end", "cfl_safety", "diag_every"],
    ),
    ("grid", &["nx", "ny", "lx", "ly"]),
    (
        "ic",
        &[
            "kind",
            "center_x",
            "center_y",
            "width",
            "mass",
            "mass_factor",
            "floor",
            "value",
            "mean",
            "amplitude",
            "path",
            "w_path",
            "perturbation",
        ],
    ),
    ("output", &["dir", "snapshot_every"]),
    (
        "experiment",
        &["gammas", "blowup_factor", "blowup_threshold", "horizon_factor", "self_compare", "s_step"],
    ),
];

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

fn config_err(line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(Some(line), "unterminated section header"))?
                    .trim();
                if name.is_empty() || !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(config_err(Some(line), format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(Some(line), format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let allowed = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, keys)| *keys).unwrap_or(&[]);
            if !allowed.contains(&key) {
                let place = if section.is_empty() {
                    "at top level".to_string()
                } else {
                    format!("in [{section}]")
                };
                return Err(config_err(Some(line), format!("unknown key `{key}` {place}")));
            }
            if value.is_empty() {
                return Err(config_err(Some(line), format!("`{key}` has no value")));
            }
            let id = (section.clone(), key.to_string());
            if let Some(first) = entries.get(&id) {
                return Err(config_err(
                    Some(line),
                    format!("duplicate key `{key}` (first set on line {})", first.line),
                ));
            }
            entries.insert(
                id,
                Entry {
                    value: value.to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Self { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries
            .get_mut(&(section.to_string(), key.to_string()))
            .map(|e| {
                e.used = true;
                (e.value.clone(), e.line)
            })
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entries.get(&(section.to_string(), key.to_string())).map(|e| e.line)
    }

    fn parsed<T: FromStr>(&mut self, section: &str, key: &str, what: &str) -> Result<Option<(T, usize)>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(|x| Some((x, line)))
                .map_err(|_| config_err(Some(line), format!("`{key}` must be {what}, got `{v}`"))),
        }
    }

    fn real(&mut self, section: &str, key: &str) -> Result<Option<(f64, usize)>> {
        match self.parsed::<f64>(section, key, "a real number")? {
            Some((x, line)) if !x.is_finite() => Err(config_err(Some(line), format!("`{key}` must be finite"))),
            other => Ok(other),
        }
    }

    fn positive(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.real(section, key)? {
            None => Ok(default),
            Some((x, _)) if x > 0.0 => Ok(x),
            Some((x, line)) => Err(config_err(Some(line), format!("`{key}` must be positive, got {x}"))),
        }
    }

    fn count(&mut self, section: &str, key: &str, default: usize, min: usize) -> Result<usize> {
        match self.parsed::<usize>(section, key, "a non-negative integer")? {
            None => Ok(default),
            Some((x, _)) if x >= min => Ok(x),
            Some((x, line)) => Err(config_err(Some(line), format!("`{key}` must be at least {min}, got {x}"))),
        }
    }

    /// Errors on any key that was set but is meaningless here.
    fn forbid(&self, section: &str, keys: &[&str], why: &str) -> Result<()> {
        for key in keys {
            if let Some(line) = self.line_of(section, key) {
                return Err(config_err(Some(line), format!("`{key}` {why}")));
            }
        }
        Ok(())
    }
}

/// Parses a configuration whose `mode` key is required.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_for(text, None)
}

/// Parses a configuration for `mode`. A `mode` key in the text must agree.
pub fn parse_config_for(text: &str, mode: Option<Mode>) -> Result<RunConfig> {
    let mut t = Table::parse(text)?;

    let file_mode = match t.take("", "mode") {
        Some((v, line)) => Some(v.parse::<Mode>().map_err(|e| config_err(Some(line), e))?),
        None => None,
    };
    let mode = match (mode, file_mode) {
        (Some(m), Some(f)) if m != f => {
            let line = t.line_of("", "mode");
            return Err(config_err(line, format!("file says mode `{f}` but `{m}` was requested")));
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(config_err(None, "missing `mode`")),
    };

    let d = Params::default();
    let gamma = match mode {
        Mode::RunFull => t
            .real("params", "gamma")?
            .ok_or_else(|| config_err(None, "run-full needs `gamma` in [params]"))
            .and_then(|(g, line)| {
                if g > 0.0 {
                    Ok(g)
                } else {
                    Err(config_err(Some(line), format!("`gamma` must be positive, got {g}")))
                }
            })?,
        _ => {
            t.forbid("params", &["gamma"], &format!("is not used by {mode}"))?;
            d.gamma
        }
    };
    let params = Params {
        d_w: t.positive("params", "d_w", d.d_w)?,
        alpha: t.positive("params", "alpha", d.alpha)?,
        theta: t.positive("params", "theta", d.theta)?,
        gamma,
        dt: t.positive("params", "dt", d.dt)?,
        t_end: t.positive("params", "t_end", d.t_end)?,
        cfl_safety: match t.real("params", "cfl_safety")? {
            None => d.cfl_safety,
            Some((c, _)) if c > 0.0 && c <= 1.0 => c,
            Some((c, line)) => {
                return Err(config_err(Some(line), format!("`cfl_safety` must lie in (0, 1], got {c}")));
            }
        },
        diag_every: t.count("params", "diag_every", d.diag_every, 1)?,
    };

    let nx = t.count("grid", "nx", 128, 2)?;
    let ny = t.count("grid", "ny", nx, 2)?;
    let lx = t.positive("grid", "lx", 1.0)?;
    let ly = t.positive("grid", "ly", lx)?;
    let grid = Grid::new(nx, ny, lx, ly).map_err(|e| config_err(t.line_of("grid", "nx"), e.to_string()))?;

    let ic = parse_ic(&mut t, mode, &params, &grid)?;
    let perturbation = match t.real("ic", "perturbation")? {
        None => 0.0,
        Some((p, _)) if (0.0..1.0).contains(&p) => p,
        Some((p, line)) => return Err(config_err(Some(line), format!("`perturbation` must lie in [0, 1), got {p}"))),
    };

    let out_dir = PathBuf::from(t.take("output", "dir").map(|v| v.0).unwrap_or_else(|| "out".into()));
    let snapshot_every = t.count("output", "snapshot_every", 0, 0)?;
    if snapshot_every > 0 {
        if !matches!(mode, Mode::RunFull | Mode::RunLimit) {
            t.forbid("output", &["snapshot_every"], &format!("is not used by {mode}"))?;
        }
        if snapshot_every % params.diag_every != 0 {
            return Err(config_err(
                t.line_of("output", "snapshot_every"),
                format!("`snapshot_every` must be a multiple of diag_every = {}", params.diag_every),
            ));
        }
    }

    let gammas = match mode {
        Mode::GammaSweep | Mode::BlowupProbe => match t.take("experiment", "gammas") {
            None if mode == Mode::GammaSweep => DEFAULT_SWEEP_GAMMAS.to_vec(),
            None => DEFAULT_PROBE_GAMMAS.to_vec(),
            Some((v, line)) => parse_gammas(&v, line)?,
        },
        _ => {
            t.forbid("experiment", &["gammas"], &format!("is not used by {mode}"))?;
            Vec::new()
        }
    };

    let blowup = match mode {
        Mode::BlowupProbe => {
            t.forbid(
                "experiment",
                &["blowup_factor", "blowup_threshold"],
                "is not used by blowup-probe, which stops at saturation",
            )?;
            BlowupRule::Factor(crate::experiments::SATURATION_FACTOR)
        }
        Mode::RescaleCheck => {
            t.forbid("experiment", &["blowup_factor", "blowup_threshold"], "is not used by rescale-check")?;
            BlowupRule::Factor(DEFAULT_BLOWUP_FACTOR)
        }
        _ => {
            let factor = t.real("experiment", "blowup_factor")?;
            let absolute = t.real("experiment", "blowup_threshold")?;
            match (factor, absolute) {
                (Some(_), Some((_, line))) => {
                    return Err(config_err(Some(line), "set `blowup_factor` or `blowup_threshold`, not both"));
                }
                (Some((f, _)), None) if f > 1.0 => BlowupRule::Factor(f),
                (Some((f, line)), None) => {
                    return Err(config_err(Some(line), format!("`blowup_factor` must exceed 1, got {f}")));
                }
                (None, Some((a, _))) if a > 0.0 => BlowupRule::Absolute(a),
                (None, Some((a, line))) => {
                    return Err(config_err(Some(line), format!("`blowup_threshold` must be positive, got {a}")));
                }
                (None, None) => BlowupRule::Factor(DEFAULT_BLOWUP_FACTOR),
            }
        }
    };

    let horizon_factor = if mode == Mode::BlowupProbe {
        match t.real("experiment", "horizon_factor")? {
            None => 1.25,
            Some((h, _)) if h >= 1.0 => h,
            Some((h, line)) => return Err(config_err(Some(line), format!("`horizon_factor` must be at least 1, got {h}"))),
        }
    } else {
        t.forbid("experiment", &["horizon_factor"], &format!("is not used by {mode}"))?;
        1.25
    };

    let self_compare = if mode == Mode::GammaSweep {
        match t.parsed::<bool>("experiment", "self_compare", "true or false")? {
            None => false,
            Some((b, _)) => b,
        }
    } else {
        t.forbid("experiment", &["self_compare"], &format!("is not used by {mode}"))?;
        false
    };

    let s_step = if mode == Mode::RescaleCheck {
        match t.real("experiment", "s_step")? {
            None => None,
            Some((s, _)) if s > 0.0 => Some(s),
            Some((s, line)) => return Err(config_err(Some(line), format!("`s_step` must be positive, got {s}"))),
        }
    } else {
        t.forbid("experiment", &["s_step"], &format!("is not used by {mode}"))?;
        None
    };

    if let Some(((section, key), e)) = t.entries.iter().find(|(_, e)| !e.used) {
        return Err(config_err(Some(e.line), format!("`{key}` in [{section}] does not apply here")));
    }

    Ok(RunConfig {
        mode,
        params,
        grid,
        ic,
        perturbation,
        out_dir,
        snapshot_every,
        gammas,
        blowup,
        horizon_factor,
        self_compare,
        s_step,
    })
}

fn parse_gammas(v: &str, line: usize) -> Result<Vec<f64>> {
    let gammas = v
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(g) if g > 0.0 && g.is_finite() => Ok(g),
                _ => Err(config_err(Some(line), format!("gamma `{s}` must be a positive number"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if gammas.is_empty() {
        return Err(config_err(Some(line), "`gammas` is empty"));
    }
    Ok(gammas)
}

const GAUSSIAN_KEYS: [&str; 6] = ["center_x", "center_y", "width", "mass", "mass_factor", "floor"];

fn parse_ic(t: &mut Table, mode: Mode, params: &Params, grid: &Grid) -> Result<InitialCondition> {
    let default_kind = if mode == Mode::RescaleCheck { "cosine" } else { "gaussian" };
    let (kind, kind_line) = t.take("ic", "kind").unwrap_or((default_kind.to_string(), 0));
    let kind_line = (kind_line > 0).then_some(kind_line);
    let not_for = format!("does not apply to ic kind `{kind}`");
    match kind.as_str() {
        "gaussian" => {
            t.forbid("ic", &["value", "mean", "amplitude", "path", "w_path"], &not_for)?;
            let probe = mode == Mode::BlowupProbe;
            let center_y_default = if probe { 0.0 } else { 0.5 * grid.ly() };
            let center = (
                t.real("ic", "center_x")?.map(|v| v.0).unwrap_or(0.5 * grid.lx()),
                t.real("ic", "center_y")?.map(|v| v.0).unwrap_or(center_y_default),
            );
            let width = t.positive("ic", "width", if probe { 0.05 } else { 0.1 })?;
            let crit = crate::functionals::critical_mass(params);
            let mass = match (t.real("ic", "mass")?, t.real("ic", "mass_factor")?) {
                (Some(_), Some((_, line))) => {
                    return Err(config_err(Some(line), "set `mass` or `mass_factor`, not both"));
                }
                (Some((m, _)), None) if m > 0.0 => m,
                (None, Some((f, _))) if f > 0.0 => f * crit,
                (Some((x, line)), None) | (None, Some((x, line))) => {
                    return Err(config_err(Some(line), format!("target mass must be positive, got {x}")));
                }
                (None, None) => (if probe { 1.5 } else { 0.5 }) * crit,
            };
            let floor = match t.real("ic", "floor")? {
                None => crate::initial::DEFAULT_FLOOR,
                Some((f, _)) if f >= 0.0 => f,
                Some((f, line)) => return Err(config_err(Some(line), format!("`floor` must be non-negative, got {f}"))),
            };
            Ok(InitialCondition::Gaussian {
                center,
                width,
                mass,
                floor,
            })
        }
        "constant" => {
            t.forbid("ic", &GAUSSIAN_KEYS, &not_for)?;
            t.forbid("ic", &["mean", "amplitude", "path", "w_path"], &not_for)?;
            let value = t.positive("ic", "value", 1.0)?;
            Ok(InitialCondition::Constant { value })
        }
        "cosine" => {
            t.forbid("ic", &GAUSSIAN_KEYS, &not_for)?;
            t.forbid("ic", &["value", "path", "w_path"], &not_for)?;
            let mean = t.positive("ic", "mean", 4.0)?;
            let amplitude = match t.real("ic", "amplitude")? {
                None => 0.5,
                Some((a, _)) if (0.0..=1.0).contains(&a) => a,
                Some((a, line)) => return Err(config_err(Some(line), format!("`amplitude` must lie in [0, 1], got {a}"))),
            };
            Ok(InitialCondition::Cosine { mean, amplitude })
        }
        "from-file" => {
            t.forbid("ic", &GAUSSIAN_KEYS, &not_for)?;
            t.forbid("ic", &["value", "mean", "amplitude"], &not_for)?;
            let path = t
                .take("ic", "path")
                .map(|v| PathBuf::from(v.0))
                .ok_or_else(|| config_err(kind_line, "ic kind `from-file` needs `path`"))?;
            let w_path = t.take("ic", "w_path").map(|v| PathBuf::from(v.0));
            Ok(InitialCondition::FromFile { path, w_path })
        }
        other => Err(config_err(
            kind_line,
            format!("unknown ic kind `{other}` (expected gaussian, constant, cosine or from-file)"),
        )),
    }
}

impl RunConfig {
    /// Renders the resolved configuration, defaults included, in the input
    /// format. Parsing the result gives back an equal configuration.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "\n[params]");
        let _ = writeln!(s, "d_w = {:?}\nalpha = {:?}\ntheta = {:?}", p.d_w, p.alpha, p.theta);
        if self.mode == Mode::RunFull {
            let _ = writeln!(s, "gamma = {:?}", p.gamma);
        }
        let _ = writeln!(
            s,
            "dt = {:?}\nt_end = {:?}\ncfl_safety = {:?}\ndiag_every = {}",
            p.dt, p.t_end, p.cfl_safety, p.diag_every
        );
        let g = &self.grid;
        let _ = writeln!(s, "\n[grid]\nnx = {}\nny = {}\nlx = {:?}\nly = {:?}", g.nx(), g.ny(), g.lx(), g.ly());
        let _ = writeln!(s, "\n[ic]");
        match &self.ic {
            InitialCondition::Gaussian {
                center,
                width,
                mass,
                floor,
            } => {
                let _ = writeln!(
                    s,
                    "kind = gaussian\ncenter_x = {:?}\ncenter_y = {:?}\nwidth = {:?}\nmass = {:?}\nfloor = {:?}",
                    center.0, center.1, width, mass, floor
                );
            }
            InitialCondition::Constant { value } => {
                let _ = writeln!(s, "kind = constant\nvalue = {value:?}");
            }
            InitialCondition::Cosine { mean, amplitude } => {
                let _ = writeln!(s, "kind = cosine\nmean = {mean:?}\namplitude = {amplitude:?}");
            }
            InitialCondition::FromFile { path, w_path } => {
                let _ = writeln!(s, "kind = from-file\npath = {}", path.display());
                if let Some(w) = w_path {
                    let _ = writeln!(s, "w_path = {}", w.display());
                }
            }
        }
        let _ = writeln!(s, "perturbation = {:?}", self.perturbation);
        let _ = writeln!(s, "\n[output]\ndir = {}", self.out_dir.display());
        if matches!(self.mode, Mode::RunFull | Mode::RunLimit) {
            let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        }
        let mut exp = String::new();
        if !self.gammas.is_empty() {
            let list: Vec<String> = self.gammas.iter().map(|g| format!("{g:?}")).collect();
            let _ = writeln!(exp, "gammas = {}", list.join(", "));
        }
        if matches!(self.mode, Mode::RunFull | Mode::RunLimit | Mode::GammaSweep) {
            match self.blowup {
                BlowupRule::Factor(f) => {
                    let _ = writeln!(exp, "blowup_factor = {f:?}");
                }
                BlowupRule::Absolute(a) => {
                    let _ = writeln!(exp, "blowup_threshold = {a:?}");
                }
            }
        }
        match self.mode {
            Mode::BlowupProbe => {
                let _ = writeln!(exp, "horizon_factor = {:?}", self.horizon_factor);
            }
            Mode::GammaSweep => {
                let _ = writeln!(exp, "self_compare = {}", self.self_compare);
            }
            Mode::RescaleCheck => {
                if let Some(st) = self.s_step {
                    let _ = writeln!(exp, "s_step = {st:?}");
                }
            }
            _ => {}
        }
        if !exp.is_empty() {
            let _ = write!(s, "\n[experiment]\n{exp}");
        }
        s
    }
}
