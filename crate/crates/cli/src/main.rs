//! `hesskit` command-line front end.
//!
//! Exit codes: 0 success, 1 unreadable or invalid input, 2 domain violation,
//! 3 verification or reproduction tolerance failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hesskit::reproduce::Case;

#[derive(Parser, Debug)]
#[command(name = "hesskit", version, about = "Hessians, finite-difference checks and gradient flows for multi-agent coordination potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble the reduced Hessian of a problem spec and write it out.
    Hessian(HessianArgs),
    /// Compare analytic derivatives against central finite differences.
    Verify(VerifyArgs),
    /// Integrate the gradient flow and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Report the Hessian spectrum, inertia and verdict at a configuration.
    Classify(ClassifyArgs),
    /// Check the assembly against hand-written closed forms.
    Reproduce(ReproduceArgs),
    /// Print the JSON schema for problem specs.
    Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Debug)]
struct HessianArgs {
    spec: PathBuf,
    /// Output file; standard output if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, group = "method")]
    analytic: bool,
    #[arg(long, group = "method")]
    fd: bool,
    #[arg(long, group = "method")]
    both: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Finite-difference base step (scaled by max(1, |p|_inf)).
    #[arg(long = "h", default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = hesskit::DEFAULT_TAU_REL)]
    tau_rel: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    spec: PathBuf,
    /// Base step; with --sweep, a comma-separated list of steps.
    #[arg(long = "h", value_delimiter = ',')]
    steps: Vec<f64>,
    /// Relative tolerance on gradient and Hessian entries.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Tabulate error against step size and fit the convergence order.
    #[arg(long)]
    sweep: bool,
    /// Add DELTA to analytic Hessian entry (ROW, COL), 1-based full
    /// coordinates, before comparing.
    #[arg(long, value_name = "ROW,COL,DELTA", value_parser = parse_perturb)]
    perturb: Option<(usize, usize, f64)>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    spec: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-9)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// CSV output file; standard output if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Print the terminal equilibrium report as JSON after the run.
    #[arg(long)]
    classify: bool,
    #[arg(long, default_value_t = hesskit::DEFAULT_TAU_REL)]
    tau_rel: f64,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    spec: PathBuf,
    #[arg(long, default_value_t = hesskit::DEFAULT_TAU_REL)]
    tau_rel: f64,
    /// Run the gradient flow first and classify where it stops.
    #[arg(long)]
    find: bool,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-9)]
    grad_tol: f64,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(value_parser = parse_case)]
    case: Case,
    /// Also evaluate random samples drawn from this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random samples when a seed is given.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long)]
    json: bool,
}

fn parse_case(s: &str) -> Result<Case, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Case::ALL.iter().map(|c| c.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_perturb(s: &str) -> Result<(usize, usize, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [r, c, d] = parts.as_slice() else {
        return Err("expected ROW,COL,DELTA".into());
    };
    let idx = |v: &str| match v.parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i - 1),
        _ => Err(format!("{v:?} is not a 1-based index")),
    };
    Ok((idx(r)?, idx(c)?, d.parse().map_err(|e| format!("{d:?}: {e}"))?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = commands::configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Hessian(a) => commands::hessian(a),
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Classify(a) => commands::classify(a),
        Command::Reproduce(a) => commands::reproduce(a),
        Command::Schema => commands::schema(),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
