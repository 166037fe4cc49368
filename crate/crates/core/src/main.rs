use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use orbitwatch::pipeline::{cmd_detect, cmd_eval, cmd_synth, cmd_train, RunConfig};

#[derive(Parser)]
#[command(
    name = "orbitwatch",
    version,
    about = "LSTM autoencoder anomaly detection for beam monitors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic run (series, beam current, fault file)
    Synth(Common),
    /// Train the autoencoder and calibrate the threshold
    Train(Common),
    /// Flag anomalies in the test split
    Detect(Common),
    /// Score flagged anomalies against ground truth
    Eval(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set epochs=5`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> orbitwatch::Result<()> {
    let (command, common) = match &cli.command {
        Command::Synth(c) => ("synth", c),
        Command::Train(c) => ("train", c),
        Command::Detect(c) => ("detect", c),
        Command::Eval(c) => ("eval", c),
    };
    let cfg = RunConfig::load(&common.config, &common.overrides)?;
    match command {
        "synth" => {
            cmd_synth(&cfg)?;
            println!("wrote {} series, current and faults", cfg.series.len());
        }
        "train" => {
            let r = cmd_train(&cfg)?;
            print!("{}", r.to_text());
        }
        "detect" => {
            let s = cmd_detect(&cfg)?;
            println!(
                "{} windows, {} anomalies -> {}",
                s.windows,
                s.anomalies,
                cfg.anomalies_path().display()
            );
        }
        _ => {
            let r = cmd_eval(&cfg)?;
            print!("{}", r.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("orbitwatch: {e}");
            ExitCode::FAILURE
        }
    }
}
