//! Command-line harness: single solves from Matrix Market files and interior
//! point runs from LP files, reported as tables, CSV or JSON lines.

pub mod report;
pub mod run;

pub use run::{run, Cli, CliError, Outcome};
