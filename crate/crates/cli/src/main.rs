use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

/// Environment variable capping the number of worker threads.
const THREADS_ENV: &str = "ALSUB_THREADS";

#[derive(Parser)]
#[command(
    name = "alsub",
    version,
    about = "Run and compare active-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several configs that differ only in strategy or policy.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize every results.csv under a directory.
    Report { dir: PathBuf },
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let r = alsub_cli::cmd_run(&config, &out)
                .with_context(|| format!("run {} failed", config.display()))?;
            println!(
                "{}: final accuracy {:.4}, {} AF evaluations (savings {:.4}), results in {}",
                r.summary.experiment_id,
                r.summary.final_mean_accuracy,
                r.summary.total_af_evaluations,
                r.summary.savings_vs_full_pool,
                out.display()
            );
        }
        Command::Compare { configs, out } => {
            let c = alsub_cli::cmd_compare(&configs, &out).context("compare failed")?;
            for e in &c.comparison.entries {
                println!(
                    "{}: final {:.4} (delta {:+.4}), {} AF evaluations",
                    e.experiment_id, e.final_mean_accuracy, e.final_delta, e.total_af_evaluations
                );
            }
            println!("results in {}", out.display());
        }
        Command::Report { dir } => {
            alsub_cli::cmd_report(&dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = init_threads().and_then(|()| run(cli)) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
