//! Batch front end: reads a TOML problem file, runs one solver, and writes a
//! per-sweep CSV trace and a JSON report.

pub mod load;
pub mod run;
pub mod schema;

pub use load::{build_instance, load_problem, parse_problem_file, read_problem_file, read_warmstart, Instance, LoadError, RunConfig};
pub use run::{run, Report, RunOutput, Status};
pub use schema::{Algorithm, ProblemFile, SetSpec, ShqpSchedule, TreeSpec};

pub const EXIT_OK: i32 = 0;
/// The solver stopped at its sweep limit before meeting the tolerance.
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// Unreadable or invalid problem file.
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
