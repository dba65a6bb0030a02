use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pinlab::{run, workers_from_env, Command, ExperimentConfig, Overrides, RunError, WORKERS_ENV};

/// Disordered renewal pinning: estimators, checks and disorder samples.
#[derive(Debug, Parser)]
#[command(name = "pinlab", version)]
struct Cli {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Pinning strength; a comma list runs a grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    h: Option<Vec<f64>>,
    /// System size; a comma list runs several.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("pinlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, RunError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|source| RunError::Io { path: cli.config.clone(), source })?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    config.apply(&Overrides {
        h: cli.h.clone(),
        n: cli.n.clone(),
        replicas: cli.replicas,
        seed: cli.seed,
        out: cli.out.clone(),
    });
    let workers = workers_from_env(std::env::var(WORKERS_ENV).ok().as_deref())?;
    let outcome = run(&config, cli.command, workers)?;
    for d in &outcome.manifest.outputs {
        println!("{}", outcome.output_dir.join(&d.file).display());
    }
    for w in &outcome.manifest.warnings {
        eprintln!("warning: {w}");
    }
    if outcome.exit_code != 0 {
        eprintln!("pinlab: at least one check failed");
    }
    Ok(outcome.exit_code)
}
