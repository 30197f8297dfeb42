use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quadflow::{run_experiment, CliError, ExperimentConfig, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "quadflow", version, about = "Teacher-student gradient-flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV, SVG and manifest.json.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        /// JSON configuration; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dimension; repeat or comma-separate for several.
        #[arg(long, value_delimiter = ',')]
        d: Vec<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "alpha-star")]
        alpha_star: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Print the experiment catalog.
    List,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            for k in ExperimentKind::ALL {
                println!("{:<18} {}", k.name(), k.summary());
            }
            Ok(())
        }
        Command::Run { experiment, config, seed, out, d, alpha, alpha_star, eta, horizon } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            cfg.apply(&Overrides { experiment, seed, out, d, alpha, alpha_star, eta, horizon })?;
            let outcome = run_experiment(&cfg)?;
            for line in &outcome.lines {
                println!("{line}");
            }
            println!("manifest: {}", outcome.manifest.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
