mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use schelling_core::lattice::parse_fraction;
use schelling_core::{Dim, Fraction, ModelParams};

#[derive(Parser, Debug)]
#[command(name = "schelling", version = env!("CARGO_PKG_VERSION"), about = "Schelling segregation dynamics on the torus")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the dynamics from a random start and write the run record.
    Simulate(commands::SimulateArgs),
    /// Majority behaviour over a grid of intolerance pairs.
    Sweep(commands::SweepArgs),
    /// Critical intolerances and the table of minimal gaps.
    Thresholds(commands::ThresholdsArgs),
    /// Evaluate local events on a configuration, or estimate their probability.
    Events(commands::EventsArgs),
    /// Disc conditions, smallest admissible radius, planted-disc runs.
    Structures(commands::StructuresArgs),
    /// Compare the fast engine with the reference engine stage by stage.
    OracleCheck(commands::OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub dim: u8,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub w: usize,
    #[arg(long, value_parser = parse_tau)]
    pub tau_alpha: Fraction,
    #[arg(long, value_parser = parse_tau)]
    pub tau_beta: Fraction,
}

impl ModelArgs {
    pub fn params(&self) -> anyhow::Result<ModelParams> {
        model_params(self.dim, self.n, self.w, self.tau_alpha, self.tau_beta)
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "SCHELLING_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn dim_of(d: u8) -> Dim {
    if d == 3 {
        Dim::Three
    } else {
        Dim::Two
    }
}

pub fn model_params(dim: u8, n: usize, w: usize, ta: Fraction, tb: Fraction) -> anyhow::Result<ModelParams> {
    ModelParams::new(dim_of(dim), n, w, ta, tb).map_err(|e| Usage(e.to_string()).into())
}

/// An intolerance in `[0, 1]`, as a decimal or `p/q`.
pub fn parse_tau(s: &str) -> Result<Fraction, String> {
    let f = parse_fraction(s).map_err(|e| e.to_string())?;
    if f > Fraction::from_integer(1) {
        return Err(format!("{s} is not in [0, 1]"));
    }
    Ok(f)
}

pub fn parse_tau_list(s: &str) -> Result<Vec<Fraction>, String> {
    s.split(',').map(parse_tau).collect()
}

/// Errors that should be reported like a bad flag.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Thresholds(a) => commands::thresholds(a),
        Command::Events(a) => commands::events(a),
        Command::Structures(a) => commands::structures(a),
        Command::OracleCheck(a) => commands::oracle_check(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
