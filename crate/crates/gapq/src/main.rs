//! Command-line front end: reads a JSON experiment config, runs one of the
//! experiment kinds, writes `<out>/<command>.csv`, and prints the summary.
//!
//! Exit codes: 0 success, 2 config problem, 3 model/solve failure, 4 I/O.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use gapq::config::ExperimentSpec;
use gapq::experiment::{
    emit_csv, run_analyze, run_approx, run_simulate, run_sweep, run_table, ExperimentOutput,
};
use gapq::numerics::Tolerances;

#[derive(Parser)]
#[command(
    name = "gapq",
    about = "Delay analysis for gap acceptance at a priority intersection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the output CSV.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Truncation order for moment extraction (2..=12).
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=12))]
    jet_order: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured model once and print all delay moments.
    Analyze(CommonArgs),
    /// Mean-wait curves over the configured mean-flow grid.
    Sweep(CommonArgs),
    /// Run the discrete-event simulator beside the analytic solution.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Master seed; replications derive independent streams from it.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of independent replications.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Exact versus approximate mean sojourn over the configured load grid.
    Approx(CommonArgs),
    /// Mean/variance grid over batch cases, behaviors, and mean flows.
    Table1(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, file_stem): (&CommonArgs, &str) = match &cli.command {
        Command::Analyze(c) => (c, "analyze"),
        Command::Sweep(c) => (c, "sweep"),
        Command::Simulate { common, .. } => (common, "simulate"),
        Command::Approx(c) => (c, "approx"),
        Command::Table1(c) => (c, "table1"),
    };

    let spec = match ExperimentSpec::from_file(&common.config) {
        Ok(spec) => spec,
        Err(err) => return fail("config", &err.to_string()),
    };
    let mut tol = Tolerances::default();
    if let Some(order) = common.jet_order {
        tol = tol.with_jet_order(order as usize);
    }

    let result = match &cli.command {
        Command::Analyze(_) => run_analyze(&spec, tol),
        Command::Sweep(_) => run_sweep(&spec, tol),
        Command::Simulate {
            seed, replications, ..
        } => run_simulate(&spec, tol, *seed, *replications),
        Command::Approx(_) => run_approx(&spec, tol),
        Command::Table1(_) => run_table(&spec, tol),
    };
    let output = match result {
        Ok(output) => output,
        Err(err) => return fail(err.category(), &err.to_string()),
    };

    match write_output(&common.out, file_stem, &output) {
        Ok(path) => {
            print!("{}", output.summary);
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(err) => fail("io", &err.to_string()),
    }
}

fn write_output(
    out_dir: &PathBuf,
    file_stem: &str,
    output: &ExperimentOutput,
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{file_stem}.csv"));
    std::fs::write(&path, emit_csv(&output.rows))?;
    Ok(path)
}

fn fail(category: &str, message: &str) -> ExitCode {
    eprintln!("error[{category}]: {message}");
    ExitCode::from(match category {
        "config" => 2,
        "model" => 3,
        _ => 4,
    })
}
