use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moeaar_bench::commands;
use moeaar_bench::{Method, Result, RunConfig};

#[derive(Parser)]
#[command(name = "moeaar", version, about = "EEG source localization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scenario suite and its manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve one scenario with one method.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: String,
        /// Scenario label, e.g. frontal-punctual-snr0.
        #[arg(long)]
        scenario: String,
    },
    /// Run every method on every scenario and repeat.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Restrict to these methods (repeatable).
        #[arg(long)]
        method: Vec<String>,
    },
    /// Summarize results.csv of an output directory.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

/// `None` means the configuration was printed and nothing else should run.
fn resolve(common: &Common) -> Result<Option<RunConfig>> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    if common.print_config {
        print!("{}", config.to_toml());
        return Ok(None);
    }
    Ok(Some(config))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let Some(config) = resolve(&common)? else { return Ok(()) };
            let manifest = commands::simulate(&config)?;
            println!("wrote {} scenarios to {}", manifest.scenarios.len(), config.out.display());
        }
        Command::Solve { common, method, scenario } => {
            let method: Method = method.parse()?;
            let Some(config) = resolve(&common)? else { return Ok(()) };
            let out = commands::solve(&config, &scenario, method)?;
            let r = &out.row;
            println!(
                "{} {} seed {}: le {:.4} vis {:.4} sr {:.4} -> {}",
                r.method,
                scenario,
                r.seed,
                r.le_score.unwrap_or(f64::NAN),
                r.vis_score.unwrap_or(f64::NAN),
                r.sr_score.unwrap_or(f64::NAN),
                out.dir.display()
            );
        }
        Command::Bench { common, method } => {
            let methods = method.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
            let Some(mut config) = resolve(&common)? else { return Ok(()) };
            if !methods.is_empty() {
                config.methods = methods;
            }
            config.validate()?;
            let out = commands::bench(&config, true)?;
            println!("{} rows, {} failed -> {}", out.outcomes.len(), out.failures.len(), config.out.display());
        }
        Command::Report { common } => {
            let Some(config) = resolve(&common)? else { return Ok(()) };
            let summaries = commands::report(&config.out)?;
            print!("{}", moeaar_bench::report::to_markdown(&summaries));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

