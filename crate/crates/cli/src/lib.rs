//! Command-line front end: phantom generation, splitting, training, ablation,
//! evaluation, DeLong comparison and ROC export, all writing JSON reports.

pub mod cli;
pub mod commands;
pub mod config;
pub mod report;

use spacesqueeze::{Error, ErrorKind};

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}
