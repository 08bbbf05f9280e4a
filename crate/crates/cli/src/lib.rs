//! Library surface of the workbench binary, exposed so integration tests can
//! drive the commands directly.

pub mod commands;
pub mod config;

use beamtrack::error::Error;

/// Process exit code for an error: 2 config, 3 I/O, 4 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        Error::Io { .. } | Error::Format { .. } | Error::Csv { .. } => 3,
        Error::Numeric(_) => 4,
    }
}
