use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use voxplore::world::WorldKind;
use voxplore_cli::{
    cmd_check, cmd_compare, cmd_gen_world, cmd_run, exit_code, parse_dims, parse_seeds, parse_strategies, CliError,
    Completion, EXIT_ERROR, EXIT_OK,
};

#[derive(Parser)]
#[command(
    name = "voxplore",
    version,
    about = "Deterministic multi-robot 3D exploration simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and export metrics, summary, map and world.
    Run {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compare strategies across seeds and write a CSV table.
    Compare {
        scenario: PathBuf,
        /// Comma-separated presets: nearest, independent, greedy, hungarian, ellipse.
        #[arg(long)]
        strategies: String,
        /// Inclusive range `1..20` or list `1,2,3`.
        #[arg(long)]
        seeds: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate a world file.
    GenWorld {
        #[arg(long)]
        kind: WorldKind,
        /// X,Y,Z voxel counts.
        #[arg(long)]
        dims: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        fires: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Validate a scenario and print its canonical form.
    Check { scenario: PathBuf },
}

fn report(result: Result<Completion, CliError>) -> ExitCode {
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out } => report(cmd_run(&scenario, &out)),
        Command::Compare {
            scenario,
            strategies,
            seeds,
            out,
        } => report(
            parse_strategies(&strategies)
                .and_then(|s| Ok((s, parse_seeds(&seeds)?)))
                .and_then(|(s, seeds)| cmd_compare(&scenario, &s, &seeds, &out)),
        ),
        Command::GenWorld {
            kind,
            dims,
            seed,
            fires,
            out,
        } => match parse_dims(&dims).and_then(|d| cmd_gen_world(kind, d, seed, fires, &out)) {
            Ok(count) => {
                println!("{count}");
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ERROR as u8)
            }
        },
        Command::Check { scenario } => match cmd_check(&scenario) {
            Ok(text) => {
                print!("{text}");
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ERROR as u8)
            }
        },
    }
}
