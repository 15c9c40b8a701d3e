//! Configuration, snapshots and CSV output.

pub mod config;
pub mod csv;
pub mod snapshot;

pub use config::{parse_config, parse_config_for, BlowupRule, InitialCondition, Mode, RunConfig};
pub use csv::{append_diag, DiagWriter};
pub use snapshot::{read_snapshot, read_snapshot_on, snapshot_path, write_snapshot};
