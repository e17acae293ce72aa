//! Configuration, snapshots, manifests and the experiment runners used by
//! the command-line tool.

mod config;
mod experiments;
mod manifest;
mod snapshot;

pub use config::Config;
pub use experiments::{lattice_from, pair_from, run_experiment, Check, Experiment, RunSummary};
pub use manifest::{RunManifest, Table};
pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

use crate::error::Error;

/// Process exit status for an error: 2 for configuration and input
/// problems, 3 for solver failures, 4 for failed audits and violated
/// hypotheses.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::EnergyIncrease { .. } | Error::SolverFailure(_) => 3,
        Error::InvalidLattice(_)
        | Error::AxisOutOfRange { .. }
        | Error::DimensionMismatch { .. }
        | Error::ShapeMismatch(_)
        | Error::NonFinite
        | Error::RegionExceedsDomain
        | Error::InvalidFrame(_)
        | Error::UnsupportedFrame
        | Error::InvalidConfig(_)
        | Error::ConfigParse { .. }
        | Error::BadMagic
        | Error::VersionMismatch { .. }
        | Error::TruncatedFile
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        _ => 4,
    }
}
