//! Command-line front end: problem files, run reports and the built-in
//! worked examples.

pub mod error;
pub mod problem;
pub mod report;
pub mod reproduce;
pub mod run;

pub use error::CliError;
pub use problem::ProblemFile;
pub use report::RunReport;
pub use run::{execute, write_report, Cli, Command, Outcome};
