use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use bestapprox_cli::{
    build_instance, read_problem_file, read_warmstart, run, Algorithm, ShqpSchedule, Status, EXIT_INPUT,
    EXIT_NOT_CONVERGED, EXIT_OK, EXIT_SOLVER,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bestapprox", version, about = "Project a point onto an intersection of convex sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem in a TOML file.
    Run(RunArgs),
    /// Check a problem file and print its size.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    buffer_capacity: Option<usize>,
    #[arg(long, value_enum)]
    shqp_schedule: Option<ShqpSchedule>,
    /// JSON array with one starting block per set.
    #[arg(long)]
    warmstart_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the CSV trace (stdout is left for the report).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn write(path: &PathBuf, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run_command(args: RunArgs) -> ExitCode {
    let mut file = match read_problem_file(&args.file) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    if let Some(a) = args.algorithm {
        file.algorithm = a;
    }
    let o = &mut file.options;
    o.tolerance = args.tolerance.or(o.tolerance);
    o.max_sweeps = args.max_sweeps.or(o.max_sweeps);
    o.buffer_capacity = args.buffer_capacity.or(o.buffer_capacity);
    o.shqp_schedule = args.shqp_schedule.or(o.shqp_schedule);
    o.seed = args.seed.or(o.seed);
    if let Some(path) = &args.warmstart_file {
        match read_warmstart(path) {
            Ok(w) => o.warmstart = Some(w),
            Err(e) => return fail(EXIT_INPUT, e),
        }
    }
    let instance = match build_instance(&file) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let out = match run(&instance) {
        Ok(o) => o,
        Err(e) => return fail(EXIT_SOLVER, e),
    };
    if let Some(path) = &args.trace_out {
        if let Err(e) = write(path, &out.trace) {
            return fail(EXIT_INPUT, e);
        }
    }
    let report = serde_json::to_string_pretty(&out.report).expect("report serializes");
    match &args.report_out {
        Some(path) => {
            if let Err(e) = write(path, &(report + "\n")) {
                return fail(EXIT_INPUT, e);
            }
        }
        None => {
            // a closed pipe is not an error worth reporting
            let _ = writeln!(std::io::stdout(), "{report}");
        }
    }
    match out.status {
        Status::Converged => ExitCode::from(EXIT_OK as u8),
        Status::ToleranceNotMet => {
            eprintln!("warning: tolerance not met after {} sweeps", out.report.sweeps);
            ExitCode::from(EXIT_NOT_CONVERGED as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; 2 is reserved for an unmet tolerance
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { EXIT_OK as u8 });
        }
    };
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Validate { file } => match read_problem_file(&file).and_then(|f| build_instance(&f)) {
            Ok(i) => {
                println!("ok: {} sets in dimension {}, algorithm {}", i.len(), i.problem.d.len(), i.algorithm.name());
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => fail(EXIT_INPUT, e),
        },
    }
}
