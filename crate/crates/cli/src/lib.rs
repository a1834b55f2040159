//! Command-line surface for the entropy-phase library: curve tabulation,
//! training-fraction optimization, finite-length convergence studies, coding
//! experiments, the pedagogical examples and the acceptance self-test.

pub mod acceptance;
pub mod args;
pub mod commands;
pub mod format;
pub mod manifest;
pub mod svg;

pub use args::{Cli, Command};
pub use commands::{execute, write_outputs, CliError, Output};
