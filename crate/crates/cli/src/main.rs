//! `orlab` — dataset generation, tabular reproductions, FQI studies,
//! training, evaluation, sweeps, and plotting from one binary.

mod evaluate;
mod fqi_study;
mod gen_data;
mod plot;
mod sweep;
mod table1;
mod train;

use clap::{Parser, Subcommand};

/// Failure classes map straight to exit codes: checked claims that did not
/// hold exit 2, everything a user can fix (flags, files, configs) exits 3.
#[derive(Debug)]
pub enum Failure {
    Property(String),
    Config(String),
}

impl Failure {
    /// Shorthand for wrapping library errors as configuration problems.
    pub fn config(e: impl std::fmt::Display) -> Self {
        Failure::Config(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

/// Prints the fully-resolved settings a run is about to use. Every
/// subcommand calls this before doing work so logs are self-describing.
pub fn echo_config<T: serde::Serialize>(cfg: &T) -> CmdResult {
    let json = serde_json::to_string_pretty(cfg).map_err(Failure::config)?;
    println!("resolved config:\n{json}");
    Ok(())
}

/// Caps the worker pool shared by every parallel section in the process.
pub fn init_jobs(jobs: Option<usize>) -> CmdResult {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(Failure::config)
}

#[derive(Parser)]
#[command(
    name = "orlab",
    version,
    about = "Desk-scale offline reinforcement-learning laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll a scripted controller and write the transitions as JSONL.
    GenData(gen_data::Args),
    /// Reproduce the two-initialization convergence grid and check every cell.
    Table1(table1::Args),
    /// Measure how warm-start interpolation shortens exact value iteration.
    FqiStudy(fqi_study::Args),
    /// Train an agent preset or config file across seeds and write metrics.
    Train(train::Args),
    /// Roll out a saved agent checkpoint and report its mean return.
    Evaluate(evaluate::Args),
    /// Run a grid of training configurations and aggregate the results.
    Sweep(sweep::Args),
    /// Render metric CSVs as an SVG with mean lines and +/-1 std bands.
    Plot(plot::Args),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; anything else is a usage error.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::GenData(args) => gen_data::run(args),
        Command::Table1(args) => table1::run(args),
        Command::FqiStudy(args) => fqi_study::run(args),
        Command::Train(args) => train::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Plot(args) => plot::run(args),
    };
    match outcome {
        Ok(()) => {}
        Err(Failure::Property(msg)) => {
            eprintln!("property failure: {msg}");
            std::process::exit(2);
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(3);
        }
    }
}
