use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbsense_core::experiment::{run_sweep, validate_config, write_sweep};
use fbsense_core::sim::SimConfig;
use fbsense_core::{Error, Scheme};

#[derive(Parser)]
#[command(
    name = "fbsense",
    version,
    about = "Soft-sensing cognitive access sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize every scheme over the configured sweep and write a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; defaults to `output.path` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add Monte Carlo columns (uses `sim.*` settings or their defaults).
        #[arg(long)]
        sim: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of fb,nofb,hard,genie.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<Scheme>>,
    },
    /// Parse a config and report problems without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const CONFIG_ERROR: u8 = 2;
const INFEASIBLE: u8 = 3;

fn report(err: &Error) -> ExitCode {
    match err {
        Error::Config(diags) => {
            for d in diags {
                eprintln!("config error: {d}");
            }
            ExitCode::from(CONFIG_ERROR)
        }
        Error::Parse { .. } => {
            eprintln!("{err}");
            ExitCode::from(CONFIG_ERROR)
        }
        other => {
            eprintln!("error: {other}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match validate_config(&config) {
            Ok(exp) => {
                println!(
                    "ok: {} sweep points x {} schemes",
                    exp.sweep.values.len(),
                    exp.schemes.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
        Command::Sweep {
            config,
            out,
            sim,
            seed,
            schemes,
        } => {
            let mut exp = match validate_config(&config) {
                Ok(exp) => exp,
                Err(e) => return report(&e),
            };
            if sim && exp.sim.is_none() {
                exp.sim = Some(SimConfig::default());
            }
            if let (Some(seed), Some(sim)) = (seed, exp.sim.as_mut()) {
                sim.seed = seed;
            }
            if let Some(list) = schemes {
                exp.schemes = list;
            }
            let Some(path) = out.or_else(|| exp.output_path.clone()) else {
                eprintln!(
                    "config error: output.path: no --out given and no output path configured"
                );
                return ExitCode::from(CONFIG_ERROR);
            };
            let output = match run_sweep(&exp) {
                Ok(o) => o,
                Err(e) => return report(&e),
            };
            if let Err(e) = write_sweep(&exp, &output, &path) {
                return report(&e);
            }
            if output.any_feasible() {
                ExitCode::SUCCESS
            } else {
                eprintln!("no feasible sweep point");
                ExitCode::from(INFEASIBLE)
            }
        }
    }
}
