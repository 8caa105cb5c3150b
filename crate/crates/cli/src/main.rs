//! `ncnn`: prepare data, export indeterminacy maps, train, evaluate and sweep.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{key_listing, ConfigError, RunConfig, OUTPUT_ENV};
use ncnn::data::DataError;
use ncnn::harness::HarnessError;
use ncnn::model::ModelError;
use ncnn::neutrosophic::NsError;
use ncnn::signal::SignalError;
use ncnn::tensor::TensorError;

#[derive(Debug, Parser)]
#[command(name = "ncnn", version, about = "Noise-robust word recognition with neutrosophic indeterminacy maps")]
struct Cli {
    /// TOML configuration file; every key is optional.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `experiment.hyperparams.learning_rate=0.005`.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output root; takes precedence over the configuration and the environment.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Maximum worker threads for feature extraction, training and evaluation.
    #[arg(long, short = 'j', global = true)]
    jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(long, short = 'v', action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only print errors.
    #[arg(long, short = 'q', global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or locate the corpus and noise bank, then write the split manifest.
    Prepare,
    /// Export spectrogram and truth/indeterminacy maps for one utterance or WAV file.
    Transform(TransformArgs),
    /// Train one model on one training condition.
    Train(TrainArgs),
    /// Evaluate checkpoints on the test sets.
    Eval(EvalArgs),
    /// Train and evaluate CNN and NCNN under clean and noisy training.
    Compare,
    /// Train and evaluate one NCNN per indeterminacy window size.
    SweepWindow,
    /// Compare product, sum and maximum fusion.
    SweepCombination,
    /// Render text tables from report CSV files.
    Report(ReportArgs),
    /// Check an architecture's declared layer shapes against computed ones.
    Shapes(ShapesArgs),
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// Manifest utterance id or path to a WAV file.
    input: String,
    /// Window as TxF; defaults to `experiment.window`.
    #[arg(long)]
    window: Option<String>,
    /// Use the min-max baseline transform instead of the mean-ratio one.
    #[arg(long)]
    baseline: bool,
    /// Destination directory; defaults to `<output>/transform`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_parser = ["cnn", "ncnn"], default_value = "ncnn")]
    model: String,
    #[arg(long, value_parser = ["clean", "noisy"], default_value = "noisy")]
    condition: String,
    /// Defaults to the first of `experiment.seeds`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(required = true)]
    checkpoints: Vec<PathBuf>,
    /// Training-condition label written into the report.
    #[arg(long, default_value = "unspecified")]
    train_condition: String,
    /// Comma-separated test sets.
    #[arg(long, default_value = "A,B,C")]
    sets: String,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Also write the tables to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ShapesArgs {
    /// Built-in architecture name or TOML path.
    #[arg(long, default_value = "table1")]
    architecture: String,
}

/// 2: configuration, 3: data or I/O, 4: numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    fn model_code(m: &ModelError) -> u8 {
        match m {
            ModelError::Tensor(TensorError::NonFinite { .. }) => 4,
            ModelError::Checkpoint(_) | ModelError::Io { .. } | ModelError::Ns(_) => 3,
            _ => 2,
        }
    }
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(h) = cause.downcast_ref::<HarnessError>() {
            return match h {
                HarnessError::NonFinite { .. } => 4,
                HarnessError::Hyperparams(_) | HarnessError::Config(_) => 2,
                HarnessError::Model(m) => model_code(m),
                _ => 3,
            };
        }
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            return model_code(m);
        }
        if cause.is::<DataError>() || cause.is::<SignalError>() || cause.is::<NsError>() || cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_help(format!(
        "Configuration keys and defaults (set with --config FILE or --set KEY=VALUE; \
         {OUTPUT_ENV} overrides paths.output):\n{}",
        key_listing()
    ));
    let cli = match Cli::from_arg_matches(&cmd.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ncnn: error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            anyhow::bail!(ConfigError("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    if let Command::Shapes(a) = &cli.command {
        return commands::shapes(&a.architecture);
    }
    if let Command::Report(a) = &cli.command {
        return commands::report(&a.csv, a.out.as_deref());
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(o) = &cli.output {
        cfg.paths.output = o.display().to_string();
    }
    match cli.command {
        Command::Prepare => commands::prepare(&cfg),
        Command::Transform(a) => commands::transform(&cfg, &a.input, a.window.as_deref(), a.baseline, a.out),
        Command::Train(a) => commands::train(&cfg, &a.model, &a.condition, a.seed),
        Command::Eval(a) => commands::eval(&cfg, &a.checkpoints, &a.train_condition, &a.sets),
        Command::Compare => commands::experiment(&cfg, "main"),
        Command::SweepWindow => commands::experiment(&cfg, "window"),
        Command::SweepCombination => commands::experiment(&cfg, "combination"),
        Command::Report(_) | Command::Shapes(_) => unreachable!("handled above"),
    }
}
