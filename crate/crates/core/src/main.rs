use clap::Parser;
use dirac_collapse::cli::{run, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run a spectral experiment described by a TOML config.
#[derive(Parser, Debug)]
#[command(name = "dirac-collapse", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized suites; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let summary = ExperimentConfig::load(&args.config).and_then(|cfg| run(&cfg, &args.out, args.seed));
    match summary {
        Ok(summary) => {
            for a in &summary.assertions {
                println!("{} {}", if a.passed { "PASS" } else { "FAIL" }, a.name);
            }
            for p in &summary.artifacts {
                log::info!("wrote {}", p.display());
            }
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
