use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use multirc::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use multirc::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Sweep,
    Basin,
    Track,
    Floquet,
    Lyapunov,
    Symmetry,
    Itinerancy,
    Neuron,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Sweep => ExperimentKind::Sweep,
            Command::Basin => ExperimentKind::Basin,
            Command::Track => ExperimentKind::Track,
            Command::Floquet => ExperimentKind::Floquet,
            Command::Lyapunov => ExperimentKind::Lyapunov,
            Command::Symmetry => ExperimentKind::Symmetry,
            Command::Itinerancy => ExperimentKind::Itinerancy,
            Command::Neuron => ExperimentKind::Neuron,
        }
    }
}

/// Multifunctional reservoir computing experiments.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed, overriding `net.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Render PNGs next to the CSVs.
    #[arg(long)]
    plots: bool,
}

fn run(cli: Cli) -> Result<Vec<String>, Error> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.net.seed = s;
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let plots = cli.plots || cfg.output.plots;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_experiment(&cfg, cli.command.into(), &out, plots))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(files) => {
            log::info!("wrote {}", files.join(", "));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
