use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use censor_lab::scenario::{run_parsed, run_scenario, Mode, RunStatus, Scenario};

#[derive(Parser)]
#[command(
    name = "censor-lab",
    version,
    about = "Disclosure-threshold numerics and Monte Carlo verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one JSON scenario.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare every closed form with the Monte Carlo oracle on the pinned battery.
    Verify {
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the largest divisor of `paths` not above 20.
        #[arg(long)]
        batches: Option<usize>,
        /// Multiplies every tolerance band; 0 forces failure.
        #[arg(long, default_value_t = 1.0)]
        band_scale: f64,
        #[arg(long, default_value = "verify")]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_batches(paths: usize) -> usize {
    (1..=20).rev().find(|b| paths % b == 0).unwrap_or(1)
}

fn report(status: RunStatus) -> ExitCode {
    if let Some(d) = &status.diagnostic {
        eprintln!("{}", d.to_json());
    }
    for p in [&status.json_path, &status.csv_path].into_iter().flatten() {
        println!("{}", p.display());
    }
    ExitCode::from(status.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => report(run_scenario(&config, &out)),
        Command::Verify {
            paths,
            steps,
            seed,
            batches,
            band_scale,
            name,
            out,
        } => {
            let params = json!({
                "n_paths": paths,
                "steps_per_unit": steps,
                "base_seed": seed,
                "batches": batches.unwrap_or_else(|| default_batches(paths)),
                "band_scale": band_scale,
            });
            let parameters: Map<String, Value> = match params {
                Value::Object(m) => m,
                _ => Map::new(),
            };
            let scenario = Scenario {
                name,
                mode: Mode::Verify,
                parameters,
                sweep_axis: None,
            };
            report(run_parsed(&scenario, &out))
        }
    }
}
