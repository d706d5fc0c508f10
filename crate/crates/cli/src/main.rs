use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qjump::commands;
use qjump::config::{parse_config, RunConfig};
use qjump::Error;

/// Quantum-jump simulation and interval statistics for driven Rydberg ensembles.
#[derive(Parser)]
#[command(name = "qjump", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Base seed; overrides `seed` from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an ensemble and write one CSV per trajectory
    Simulate(Common),
    /// Detect jumps in trajectory CSVs and histogram the intervals
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Trajectory or measurement CSV files
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Simulate and analyze a parameter grid
    Sweep(Common),
    /// Count stable fixed points over a (Delta, Omega) grid
    PhaseDiagram(Common),
    /// Fit interval-distribution models to a histogram CSV
    Fit {
        #[command(flatten)]
        common: Common,
        histogram: PathBuf,
    },
    /// Write the detuning noise seen by one trajectory
    NoiseDump {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(noise) = &cfg.noise_file {
        // relative noise files resolve against the config location
        let p = Path::new(noise);
        if p.is_relative() {
            if let Some(dir) = common.config.parent() {
                cfg.noise_file = Some(dir.join(p).to_string_lossy().into_owned());
            }
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            let paths = commands::with_threads(c.threads, || commands::cmd_simulate(&cfg, &c.out))??;
            eprintln!("wrote {} files to {}", paths.len(), c.out.display());
        }
        Command::Analyze { common: c, inputs } => {
            let cfg = load(&c)?;
            let a = commands::with_threads(c.threads, || commands::cmd_analyze(&cfg, &inputs, &c.out))??;
            print!("{}", a.summary.to_text());
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let s = commands::with_threads(c.threads, || commands::cmd_sweep(&cfg, &c.out))??;
            eprintln!("swept {} points into {}", s.rows.len(), c.out.display());
            if let Some(b) = s.best_delta {
                println!("best_Delta = {b}");
            }
        }
        Command::PhaseDiagram(c) => {
            let cfg = load(&c)?;
            commands::with_threads(c.threads, || commands::cmd_phase_diagram(&cfg, &c.out))??;
        }
        Command::Fit { common: c, histogram } => {
            let cfg = load(&c)?;
            let r = commands::with_threads(c.threads, || commands::cmd_fit(&cfg, &histogram, &c.out))??;
            print!("{}", commands::fit_text(&r));
        }
        Command::NoiseDump { common: c, index } => {
            let cfg = load(&c)?;
            let p = commands::cmd_noise_dump(&cfg, index, &c.out)?;
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
