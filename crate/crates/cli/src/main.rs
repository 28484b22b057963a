//! `walker`: train, evaluate, compare, and plot planar-walker locomotion
//! policies.

mod commands;
mod csvio;
mod evalrun;
mod plot;
mod rundir;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "walker", version, about = "Planar walker locomotion training stack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Configuration scaffolding.
    Config(ConfigArgs),
    /// Train a policy per a run configuration.
    Train {
        /// Run configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Single-threaded, byte-stable logs and checkpoints.
        #[arg(long)]
        deterministic: bool,
    },
    /// Evaluate a checkpoint: metrics.json and trajectory CSVs.
    Eval {
        /// Checkpoint path (.json or .bin or the extension-free base).
        #[arg(long)]
        ckpt: PathBuf,
        /// Number of deterministic-policy episodes.
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (defaults to the run's eval/ subdirectory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional config to cross-check morphology compatibility.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train and evaluate two configurations across seeds and emit a
    /// comparison table.
    Compare {
        /// First configuration (method A).
        #[arg(long)]
        a: PathBuf,
        /// Second configuration (method B).
        #[arg(long)]
        b: PathBuf,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
        seeds: Vec<u64>,
        /// Output directory for runs and the report.
        #[arg(long, default_value = "runs/compare")]
        out: PathBuf,
    },
    /// Render a training log or trajectory CSV as SVG.
    Plot {
        /// Input CSV(s); multiple training logs overlay as labelled curves.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[command(subcommand)]
    action: ConfigAction,
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Write a default configuration file.
    Init {
        /// Destination path.
        #[arg(default_value = "walker.json")]
        path: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
}

fn configure_threads(deterministic: bool) {
    let threads = if deterministic {
        1
    } else {
        std::env::var("WALKER_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|n| *n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    };
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Config(args) => match args.action {
            ConfigAction::Init { path, force } => {
                configure_threads(false);
                commands::cmd_config_init(&path, force)
            }
        },
        Command::Train { config, seed, deterministic } => {
            configure_threads(deterministic);
            commands::cmd_train(&config, seed, deterministic).map(|_| ())
        }
        Command::Eval { ckpt, episodes, seed, out, config } => {
            configure_threads(false);
            commands::cmd_eval(&ckpt, episodes, seed, out.as_deref(), config.as_deref()).map(|_| ())
        }
        Command::Compare { a, b, seeds, out } => {
            configure_threads(false);
            commands::cmd_compare(&a, &b, &seeds, &out).map(|_| ())
        }
        Command::Plot { input, out } => {
            configure_threads(false);
            commands::cmd_plot(&input, &out)
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
