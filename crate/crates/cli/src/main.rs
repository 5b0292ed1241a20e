use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod catalog;
mod config;
mod output;
mod pipeline;

use config::{config_hash, RunConfig};
use output::RunMeta;

/// Environment variable overriding the configured output directory.
const OUT_ENV: &str = "WIENERLAB_OUT";

#[derive(Parser)]
#[command(name = "wienerlab", version, about = "Boundary-regularity experiments for parabolic double-phase equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a configuration file.
    Run {
        config: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
        /// Worker threads (defaults to the config value, then all processors).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the scenario catalog.
    ListScenarios {
        /// One tab-separated scenario per line.
        #[arg(long)]
        machine: bool,
    },
}

fn run(config: PathBuf, force: bool, jobs: Option<usize>) -> Result<bool, String> {
    let text = std::fs::read_to_string(&config).map_err(|e| format!("reading {}: {e}", config.display()))?;
    let cfg = RunConfig::parse(&text).map_err(|e| format!("{}: {e}", config.display()))?;
    if let Some(n) = jobs.or(cfg.jobs) {
        if n == 0 {
            return Err("--jobs must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let dir = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| cfg.output.clone());
    pipeline::prepare_output(&dir, force).map_err(|e| e.to_string())?;
    let meta = RunMeta { version: env!("CARGO_PKG_VERSION"), config_hash: config_hash(&text), h: cfg.domain.h, seed: cfg.seed };
    let summary = pipeline::run(&cfg, meta, &dir).map_err(|e| e.to_string())?;
    if let Some(f) = &summary.stage_failure {
        eprintln!("stage `{}` failed: {}", f.stage, f.message);
    }
    if summary.failed_checks > 0 {
        eprintln!("{} check(s) failed", summary.failed_checks);
    }
    println!("{}: {}", dir.display(), if summary.success() { "pass" } else { "fail" });
    Ok(summary.success())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListScenarios { machine } => {
            print!("{}", if machine { catalog::render_machine() } else { catalog::render() });
            ExitCode::SUCCESS
        }
        Command::Run { config, force, jobs } => match run(config, force, jobs) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
