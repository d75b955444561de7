use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gridarena::commands::{self, EvalArgs};
use gridarena::config::SEED_ENV;
use gridarena::{CliError, CliResult};
use gridarena_core::metrics::{RankStatistic, DEFAULT_DRAWS};

#[derive(Parser)]
#[command(name = "gridarena", version, about = "Replay hyperparameter search engines on precomputed score grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Statistic {
    Dcg10,
    TimeToTop10,
    BestRank,
}

impl From<Statistic> for RankStatistic {
    fn from(s: Statistic) -> Self {
        match s {
            Statistic::Dcg10 => Self::Dcg10,
            Statistic::TimeToTop10 => Self::TimeToTop10,
            Statistic::BestRank => Self::BestRank,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a score table (scores.csv + manifest.json) from a landscape recipe.
    GenTable {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark campaign; finished runs are skipped.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Runs executed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compute metrics and reports for a run directory.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Random sequences per p estimate.
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
        /// Monte Carlo seed; defaults to $GRIDARENA_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Statistic::Dcg10)]
        statistic: Statistic,
        /// Normalize against random search at this multiplier's budget
        /// instead of each run's own budget.
        #[arg(long)]
        reference_m: Option<u32>,
    },
    /// Winner inversions between engines across model pairs.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// Prints without panicking when stdout is closed early, e.g. by `head`.
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn env_seed() -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|e| CliError::config(format!("{SEED_ENV}={s}"), e)),
        Err(_) => Ok(0),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenTable { spec, out } => {
            let path = commands::gen_table(&spec, &out)?;
            emit(&format!("wrote {}\n", path.display()));
        }
        Command::Run { config, out, jobs } => {
            let summary = commands::run(&config, &out, jobs)?;
            emit(&format!("{summary}\n"));
        }
        Command::Eval {
            input,
            out,
            draws,
            seed,
            statistic,
            reference_m,
        } => {
            let args = EvalArgs {
                draws,
                seed: match seed {
                    Some(s) => s,
                    None => env_seed()?,
                },
                statistic: statistic.into(),
                reference_multiplier: reference_m,
            };
            let result = commands::eval(&input, &out, &args)?;
            emit(&commands::report_text(&result));
        }
        Command::Compare { input } => {
            let report = commands::compare(&input)?;
            emit(&format!(
                "{}\n",
                serde_json::to_string_pretty(&report).expect("report serializes")
            ));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
