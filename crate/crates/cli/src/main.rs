use std::path::PathBuf;
use std::process::ExitCode;

use bapi_cli::aggregate::{aggregate, read_aggregate, read_trace_dir, write_aggregate};
use bapi_cli::experiment::AGGREGATE_FILE;
use bapi_cli::plot::emit_plot;
use bapi_cli::{run_experiment, CliError, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bapi", version, about = "Budget-aware Bayesian optimization benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method and seed of a configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Number of runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Output directory (overrides the config and BAPI_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render the aggregate as SVG.
        #[arg(long)]
        plot: bool,
    },
    /// Aggregate a directory of `<method>_seed<k>.csv` traces.
    Aggregate {
        traces: PathBuf,
        /// Budget defining the cost grid.
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an aggregate CSV as SVG.
    Plot {
        aggregate: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const OUT_ENV: &str = "BAPI_OUT_DIR";

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed_offset, parallel, out, plot } => {
            let cfg = RunConfig::load(&config)?;
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .ok_or_else(|| CliError::Config(format!("no output directory: pass --out, set output_dir or {OUT_ENV}")))?;
            if parallel == 0 {
                return Err(CliError::Config("--parallel must be at least 1".into()));
            }
            let summary = run_experiment(&cfg, &out_dir, seed_offset, parallel)?;
            for r in &summary.records {
                println!(
                    "{} seed {}: {} ({} rows, cost {:.4}, incumbent {:.6})",
                    r.method, r.seed, r.status, r.evaluations, r.final_cost, r.incumbent_value
                );
            }
            if plot && !summary.aggregate.is_empty() {
                emit_plot(&summary.aggregate, &out_dir.join("aggregate.svg"))?;
            }
            if summary.failures() > 0 {
                return Err(CliError::Runtime(format!("{} run(s) failed; see runs.csv", summary.failures())));
            }
            println!("wrote {}", out_dir.join(AGGREGATE_FILE).display());
            Ok(())
        }
        Command::Aggregate { traces, budget, out } => {
            if !(budget.is_finite() && budget > 0.0) {
                return Err(CliError::Config("budget must be positive".into()));
            }
            let runs = read_trace_dir(&traces)?;
            if runs.is_empty() {
                return Err(CliError::Config(format!("no traces found in {}", traces.display())));
            }
            let pairs: Vec<_> = runs.into_iter().map(|(m, _, t)| (m, t)).collect();
            write_aggregate(&aggregate(&pairs, budget), &out)
        }
        Command::Plot { aggregate, out } => emit_plot(&read_aggregate(&aggregate)?, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
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
