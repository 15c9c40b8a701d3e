//! CSV output. Every real is written as `{:.16e}`: 17 significant digits,
//! enough to round-trip, and the same bytes on every run.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::experiments::{BlowupReport, RescaleReport, SweepReport};
use crate::state::DiagRecord;

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn row(values: impl IntoIterator<Item = String>) -> String {
    let mut s = values.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

pub fn diag_row(record: &DiagRecord) -> String {
    row(record.columns().iter().map(|&x| fmt_real(x)))
}

/// Appends one row, writing the header first if the file is new or empty.
pub fn append_diag(record: &DiagRecord, path: &Path) -> Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if file.metadata()?.len() == 0 {
        writeln!(file, "{}", DiagRecord::HEADER)?;
    }
    file.write_all(diag_row(record).as_bytes())?;
    Ok(())
}

/// Buffered diagnostics file that owns its header.
pub struct DiagWriter {
    out: BufWriter<File>,
    rows: usize,
}

impl DiagWriter {
    /// Truncates `path` and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", DiagRecord::HEADER)?;
        Ok(Self { out, rows: 0 })
    }

    pub fn append(&mut self, record: &DiagRecord) -> Result<()> {
        self.out.write_all(diag_row(record).as_bytes())?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub const SWEEP_HEADER: &str = "gamma,err_n_l2t,err_w_w12_sup,err_e_l2t";
pub const SWEEP_SUMMARY_HEADER: &str = "fitted_order,liapunov_floor_constant";

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for k in 0..report.gammas.len() {
        s += &row([
            fmt_real(report.gammas[k]),
            fmt_real(report.err_n_l2t[k]),
            fmt_real(report.err_w_w12_sup[k]),
            fmt_real(report.err_e_l2t[k]),
        ]);
    }
    s
}

pub fn sweep_summary_csv(report: &SweepReport) -> String {
    format!(
        "{SWEEP_SUMMARY_HEADER}\n{}",
        row([fmt_real(report.fitted_order), fmt_real(report.liapunov_floor_constant)])
    )
}

pub const BLOWUP_HEADER: &str = "gamma,sup_l2_u,sup_l2_v,t_saturation";
pub const BLOWUP_SUMMARY_HEADER: &str = "mass,crit,initial_linf_n,t_saturation,max_linf_n,horizon";

pub fn blowup_csv(report: &BlowupReport) -> String {
    let mut s = format!("{BLOWUP_HEADER}\n");
    for k in 0..report.gammas.len() {
        s += &row([
            fmt_real(report.gammas[k]),
            fmt_real(report.sup_l2_u[k]),
            fmt_real(report.sup_l2_v[k]),
            fmt_opt(report.t_saturation_full[k]),
        ]);
    }
    s
}

pub fn blowup_summary_csv(report: &BlowupReport) -> String {
    format!(
        "{BLOWUP_SUMMARY_HEADER}\n{}",
        row([
            fmt_real(report.mass),
            fmt_real(report.crit),
            fmt_real(report.initial_linf_n),
            fmt_opt(report.t_saturation),
            fmt_real(report.max_linf_n),
            fmt_real(report.horizon),
        ])
    )
}

pub const RESCALE_HEADER: &str = "dt,s_step,max_residual_u,max_residual_v";

/// One row per trajectory, finest last.
pub fn rescale_csv(runs: &[(f64, RescaleReport)]) -> String {
    let mut s = format!("{RESCALE_HEADER}\n");
    for (dt, r) in runs {
        s += &row([
            fmt_real(*dt),
            fmt_real(r.s_step),
            fmt_real(r.max_residual_u),
            fmt_real(r.max_residual_v),
        ]);
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}
