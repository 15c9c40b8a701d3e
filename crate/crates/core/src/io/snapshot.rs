//! Binary field snapshots.
//!
//! Layout, all little-endian: the 4 bytes `CSF1`, `u32` nx, `u32` ny, `f64`
//! time, then nx * ny `f64` values in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"CSF1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// Encoded size of an `nx` by `ny` snapshot.
pub fn snapshot_len(nx: usize, ny: usize) -> usize {
    HEADER_LEN + 8 * nx * ny
}

fn snap_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Snapshot {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn encode_snapshot(f: &Field, t: f64) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(snapshot_len(g.nx(), g.ny()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a snapshot onto a grid of the given side lengths. `path` only
/// labels errors.
pub fn decode_snapshot(bytes: &[u8], lx: f64, ly: f64, path: &Path) -> Result<(Field, f64)> {
    if bytes.len() < HEADER_LEN {
        return Err(snap_err(path, format!("truncated header: {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(snap_err(path, format!("bad magic {:?}", &bytes[..4])));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    let (nx, ny) = (word(4), word(8));
    let t = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = snapshot_len(nx, ny);
    if bytes.len() != expected {
        let what = if bytes.len() < expected { "truncated" } else { "trailing bytes" };
        return Err(snap_err(
            path,
            format!("{what}: {} bytes for a {nx}x{ny} field, expected {expected}", bytes.len()),
        ));
    }
    if !t.is_finite() {
        return Err(snap_err(path, format!("non-finite time {t}")));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(snap_err(path, format!("non-finite value {} at index {k}", values[k])));
    }
    let grid = Grid::new(nx, ny, lx, ly).map_err(|e| snap_err(path, e.to_string()))?;
    Ok((Field::new(grid, values)?, t))
}

pub fn write_snapshot(f: &Field, t: f64, path: &Path) -> Result<()> {
    if !t.is_finite() {
        return Err(snap_err(path, format!("non-finite time {t}")));
    }
    fs::write(path, encode_snapshot(f, t)).map_err(|e| snap_err(path, e.to_string()))
}

/// Reads a snapshot onto the unit square. The file stores cell counts
/// only; use [`read_snapshot_on`] for other side lengths.
pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
    read_snapshot_on(path, 1.0, 1.0)
}

pub fn read_snapshot_on(path: &Path, lx: f64, ly: f64) -> Result<(Field, f64)> {
    let bytes = fs::read(path).map_err(|e| snap_err(path, e.to_string()))?;
    decode_snapshot(&bytes, lx, ly, path)
}

/// `dir/{field}_t{index:06}.csf`.
pub fn snapshot_path(dir: &Path, field: &str, index: usize) -> PathBuf {
    dir.join(format!("{field}_t{index:06}.csf"))
}
