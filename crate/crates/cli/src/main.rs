use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::Settings;

/// A user mistake: bad arguments, config or input files. Exit code 1.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Parser)]
#[command(name = "cartelscan", version, about = "Cartel screening for electricity tender data")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat TOML file with run, learner and simulator keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// MSD offers CSV.
    #[arg(long)]
    msd: PathBuf,
    /// MGP offers CSV.
    #[arg(long)]
    mgp: PathBuf,
    /// Dataset spec TOML; repeat for several datasets.
    #[arg(long = "spec", required = true)]
    specs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SingleDataArgs {
    #[arg(long)]
    msd: PathBuf,
    #[arg(long)]
    mgp: PathBuf,
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate offer files and write them back normalized, with rejected rows listed.
    Ingest {
        #[arg(long, required_unless_present = "mgp")]
        msd: Option<PathBuf>,
        #[arg(long)]
        mgp: Option<PathBuf>,
    },
    /// Assemble each dataset and write its screen table.
    Screens {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Mann-Whitney and Kolmogorov-Smirnov tests of every screen.
    TestScreens {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Generate a synthetic market with known collusive windows.
    Simulate,
    /// Fit the ensemble on a whole dataset and save the model.
    Train {
        #[command(flatten)]
        data: SingleDataArgs,
        /// msd_classical, msd_subgroup, mgp_new or combined.
        #[arg(long, default_value = "combined")]
        block: String,
    },
    /// Score every tender of a market with a saved model.
    Predict {
        #[command(flatten)]
        data: SingleDataArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Repeated split/train/test evaluation.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Default: the three blocks of each dataset's cartel type.
        #[arg(long)]
        block: Option<String>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Significance tables, evaluation tables and dataset counts in one run.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Also export hourly MGP series as CSV and SVG.
        #[arg(long)]
        figures: bool,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<InputError>().is_some() {
            return 1;
        }
        if let Some(core) = cause.downcast_ref::<cartelscan_core::Error>() {
            return if core.is_input_error() { 1 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.jobs {
        if n == 0 {
            return Err(InputError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let settings = Settings::resolve(g.config.as_deref(), g.seed)?;
    println!("# master seed: {}", settings.seed);
    println!("# resolved configuration");
    print!("{}", settings.to_toml());
    std::fs::create_dir_all(&g.out)
        .map_err(|e| InputError(format!("cannot create output directory {}: {e}", g.out.display())))?;
    let ctx = commands::Context {
        settings,
        out: g.out.clone(),
    };
    match cli.command {
        Command::Ingest { msd, mgp } => ctx.ingest(msd.as_deref(), mgp.as_deref()),
        Command::Screens { data } => ctx.screens(&data),
        Command::TestScreens { data } => ctx.test_screens(&data),
        Command::Simulate => ctx.simulate(),
        Command::Train { data, block } => ctx.train(&data, &block),
        Command::Predict { data, model } => ctx.predict(&data, &model),
        Command::Evaluate {
            data,
            block,
            repetitions,
        } => ctx.evaluate(&data, block.as_deref(), repetitions),
        Command::Report {
            data,
            repetitions,
            figures,
        } => ctx.report(&data, repetitions, figures),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
