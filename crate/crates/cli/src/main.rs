use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use delta_cli::{dispatch, parse_config, CliError, Command, DispatchOptions, RunConfig};

/// Kinematics, compliance and design-sweep tools for a linear-rail delta stage.
#[derive(Debug, Parser)]
#[command(name = "delta-stage", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration
    config: Option<PathBuf>,
    /// Same as the positional CONFIG
    #[arg(long = "config", value_name = "PATH", conflicts_with = "config")]
    config_flag: Option<PathBuf>,
    /// Directory for artifacts; overrides `out_dir` from the config
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel evaluation; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match cli.config.or(cli.config_flag) {
        Some(path) => parse_config(&path)?,
        None => RunConfig::default(),
    };
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let out_dir = cli
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = dispatch(cli.command, &cfg, &DispatchOptions { out_dir, threads: cli.threads })?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(&e)
        }
    }
}
