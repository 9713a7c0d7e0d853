use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaplab::runner::{self, RunConfig, OUT_DIR_ENV};

/// Run and inspect GAP-measure experiments.
#[derive(Parser, Debug)]
#[command(name = "gaplab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment a config describes and write its report, trial
    /// table and summary. Exits 1 when a check fails.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; beats the config's `out_dir`.
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// List registered experiments with their claims and default parameters.
    List,
    /// Parse and validate a config, then print it in canonical form.
    Validate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
}

fn load(path: &PathBuf, seed: Option<u64>, parallelism: Option<usize>) -> gaplab::Result<RunConfig> {
    let mut config = runner::parse_config_file(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(p) = parallelism {
        config.parallelism = p;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> gaplab::Result<bool> {
    match command {
        Command::Run {
            config,
            seed,
            out_dir,
            parallelism,
        } => {
            let config = load(&config, seed, parallelism)?;
            let dir = runner::resolve_out_dir(&config, out_dir.as_deref());
            let outcome = runner::run(&config, &dir)?;
            print!("{}", runner::summary(&outcome.report, Some(outcome.wall_time)));
            println!("\nreport: {}", outcome.report_path.display());
            println!("trials: {}", outcome.trials_path.display());
            println!("summary: {}", outcome.summary_path.display());
            Ok(outcome.report.passed)
        }
        Command::List => {
            for info in runner::list_experiments() {
                println!("{}\n  {}\n", info.name, info.claim);
                let mut doc = toml::Table::new();
                doc.insert("params".into(), toml::Value::Table(info.default_params));
                let defaults = toml::to_string(&doc).unwrap_or_default();
                for line in defaults.lines() {
                    if line.is_empty() { println!() } else { println!("    {line}") }
                }
                println!();
            }
            Ok(true)
        }
        Command::Validate {
            config,
            seed,
            parallelism,
        } => {
            let config = load(&config, seed, parallelism)?;
            print!("{}", config.to_toml_string());
            Ok(true)
        }
    }
}
