//! Sweeps over function families, the verification suite, and their output formats.

mod schedule;
mod sweep;
mod verify;

pub use schedule::Schedule;
pub use sweep::{run_sweep, Evidence, SweepConfig, SweepReport, SweepRow, TailCell};
pub use verify::{orthonormality_butterfly, orthonormality_direct, run_verify, CheckResult, VerifyOptions, VerifyReport};

/// Version of every JSON and CSV layout written by this module.
pub const SCHEMA_VERSION: u32 = 1;

/// Marker for exact columns beyond their dimension gate.
pub const NOT_COMPUTED: &str = "NA";

pub(crate) fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
