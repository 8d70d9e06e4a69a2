//! Batch front end for the operator-selfdecomposability toolkit: flat-file
//! configuration, reproducible experiment drivers, and JSON/CSV/binary
//! reporting.

pub mod config;
pub mod experiments;
pub mod io;
pub mod report;

pub use config::{Experiment, RunConfig};
pub use report::{Flag, Report};

/// Exit status contract: 0 all pass-flags true, 1 some flag failed,
/// 2 invalid configuration.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FLAGS_FAILED: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;
