use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use probsym::experiment::{error_json, exit_code, load_config, preset, run_experiment, ExperimentConfig, PRESETS};
use probsym::Result;

#[derive(Parser)]
#[command(name = "probsym", version, about = "Probabilistic symbol experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config, printing it with defaults filled in.
    Validate { config: PathBuf },
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides `params.seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Built-in experiments.
    Presets {
        #[command(subcommand)]
        command: PresetCommand,
    },
}

#[derive(Subcommand)]
enum PresetCommand {
    List,
    Run {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(mut config: ExperimentConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    if seed.is_some() {
        config.params.seed = seed;
    }
    let dir = out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("probsym-out"));
    let summary = run_experiment(&config, &dir)?;
    println!("{}: {}", config.experiment.as_str(), summary.headline);
    println!(
        "wrote {} files to {}",
        summary.manifest.outputs.len() + 1,
        dir.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => {
            println!("{}", load_config(config)?.to_json());
            Ok(())
        }
        Command::Run { config, out, seed } => run(load_config(config)?, out, seed),
        Command::Presets {
            command: PresetCommand::List,
        } => {
            for (name, about, _) in PRESETS {
                println!("{name:<22} {about}");
            }
            Ok(())
        }
        Command::Presets {
            command: PresetCommand::Run { name, out },
        } => run(preset(&name)?, out, None),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
