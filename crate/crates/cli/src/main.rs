//! Experiment harness front door: run comparisons from a config file,
//! materialize synthetic streams, and rank features by permutation
//! importance on a finished run.

mod config;
mod importance;
mod output;
mod synth_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use poolal::scheduler::run_comparison;
use poolal::Error;

use config::resolve;
use output::OutputLayout;

#[derive(Parser)]
#[command(name = "poolal", version, about = "Budget-constrained active learning experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured experiment and write the report CSVs.
    Run {
        /// Harness configuration file (TOML).
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the configured data seeds with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for independent runs (0 = all cores).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Materialize a synthetic stream to CSV files for inspection.
    Synth {
        /// Harness configuration file (TOML).
        config: PathBuf,
        /// Directory for the pool and label files.
        #[arg(long)]
        out: PathBuf,
        /// Override the stream seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank features by mean holdout MSE increase under column permutation.
    Importance {
        /// Output directory of a finished `run`.
        run_dir: PathBuf,
        /// Model dump to analyze; default is the first one found.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Permutations per feature.
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Permutation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Exit code 2 marks configuration problems, 1 runtime failures.
fn classify(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Schema(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            parallel,
        } => cmd_run(&config, out, seed, parallel),
        Command::Synth { config, out, seed } => synth_cmd::cmd_synth(&config, &out, seed),
        Command::Importance {
            run_dir,
            model,
            repeats,
            seed,
        } => importance::cmd_importance(&run_dir, model, repeats, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(classify(&e))
        }
    }
}

fn cmd_run(
    config_path: &PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    parallel: Option<usize>,
) -> poolal::Result<()> {
    let mut resolved = resolve(config_path)?;
    if let Some(dir) = out {
        resolved.harness.output.dir = dir;
    }
    if let Some(s) = seed {
        resolved.harness.seeds = vec![s];
    }
    if let Some(p) = parallel {
        resolved.harness.output.parallelism = p;
    }

    let layout = OutputLayout::prepare(&resolved.harness.output.dir)
        .map_err(|e| Error::Config(format!("output directory: {e}")))?;

    if resolved.harness.output.parallelism > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(resolved.harness.output.parallelism)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    // dump one model per config: the run on the first data seed
    let first_seed = resolved.harness.seeds[0];
    // the holdout the model artifacts refer to, for later importance runs
    {
        let bundle = resolved.factory.make(first_seed)?;
        importance::write_holdout_csv(
            &layout.root.join("holdout.csv"),
            &bundle.holdout,
            &resolved.feature_names,
        )?;
    }

    let checkpoints = resolved.experiments[0].checkpoints.clone();
    let sink = |record: &poolal::scheduler::RunRecord,
                outcome: &poolal::scheduler::RunOutcome|
     -> poolal::Result<()> {
        layout.write_run_artifacts(record, outcome, record.data_seed == first_seed)
    };
    let (records, comparison) = run_comparison(
        resolved.factory.as_ref(),
        &resolved.experiments,
        &resolved.harness.seeds,
        resolved.harness.alpha,
        Some(&sink),
    )?;

    layout.write_runs_table(&records)?;
    layout.write_comparison(&comparison, &checkpoints)?;
    output::print_summary(&comparison, &checkpoints);
    log::info!(
        "wrote {} runs to {}",
        records.len(),
        layout.root.display()
    );
    Ok(())
}
