//! `burgulence` command line: runs configured experiments and writes CSV tables.

mod config;
mod registry;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{parse_config, ConfigError, Overrides, Preset};
use report::{write_manifest, Manifest, Outputs};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] burgulence::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Io(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "burgulence", version, about = "Monte Carlo experiments for the stochastic Burgers equation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// smoke or full; applied after the file.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the registered experiments.
    List,
    /// Print the documented default configuration.
    ShowDefaults,
}

fn execute(config: PathBuf, output_dir: Option<PathBuf>, preset: Option<String>, seed: Option<u64>) -> Result<(), RunError> {
    let preset = match preset.as_deref() {
        None => None,
        Some(p) => Some(Preset::parse(p).ok_or_else(|| ConfigError(vec![format!("unknown preset {p:?}; expected smoke or full")]))?),
    };
    let text = std::fs::read_to_string(&config).map_err(|e| ConfigError(vec![format!("{}: {e}", config.display())]))?;
    let cfg = parse_config(&text, &Overrides { preset, seed, output_dir })?;
    let mut out = Outputs::create(&cfg.output_dir)?;
    let started = Instant::now();
    let result = run::run(&cfg, &mut out);
    let manifest = Manifest {
        experiment: &cfg.experiment,
        config_echo: &cfg.echo,
        threads: rayon::current_num_threads(),
        wall_seconds: started.elapsed().as_secs_f64(),
        files: out.files(),
        failure: result.as_ref().err(),
    };
    write_manifest(&cfg.output_dir, &manifest)?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::List => {
            print!("{}", registry::listing());
            ExitCode::SUCCESS
        }
        Command::ShowDefaults => {
            print!("{}", config::DEFAULTS);
            ExitCode::SUCCESS
        }
        Command::Run { config, output_dir, preset, seed } => match execute(config, output_dir, preset, seed) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code())
            }
        },
    }
}
