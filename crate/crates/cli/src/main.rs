//! Command-line front end: synthetic data, identification, the regression
//! baseline, headless batches, metrics export and the live service.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "myoimp", version, about = "EMG-driven variable impedance control of a single joint")]
struct Cli {
    /// JSON configuration; every block is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration.
    Config,
    /// Generate a synthetic training set from a known parameter pair.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Parameters of the simulated subject; the reference pair if absent.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Identify the MTU parameters by simulated annealing.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Annealing history CSV; next to `out` if absent.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Validation trajectories CSV; next to `out` if absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Offline tracking of recorded trials with identified parameters.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the regression baseline.
    TrainBaseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Offline tracking of recorded trials with the baseline.
    EvalBaseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a headless batch of synthetic-user trials.
    Simulate {
        /// Parameters of the framework's model; the subject's own if absent.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Baseline model; required for baseline conditions unless `--fit-baseline`.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Fit the baseline on a synthetic training set from the subject.
        #[arg(long)]
        fit_baseline: bool,
        /// Parameters of the simulated subject; the reference pair if absent.
        #[arg(long)]
        subject: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute and export metrics of a stored batch.
    Metrics {
        #[arg(long)]
        batch: PathBuf,
        /// Output directory; the batch directory if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve live sessions over websocket.
    Serve {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = config::Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
        Command::Synth { out, truth, seed } => commands::synth(&cfg, &out, truth.as_deref(), seed),
        Command::Train {
            data,
            out,
            history,
            report,
        } => commands::train(&cfg, &data, &out, history, report),
        Command::Evaluate { data, params, out } => commands::evaluate(&cfg, &data, &params, &out),
        Command::TrainBaseline { data, out, report } => commands::train_baseline(&cfg, &data, &out, report),
        Command::EvalBaseline { data, model, out } => commands::eval_baseline(&cfg, &data, &model, &out),
        Command::Simulate {
            params,
            baseline,
            fit_baseline,
            subject,
            out,
        } => commands::simulate(
            &cfg,
            commands::SimulateArgs {
                params,
                baseline,
                fit_baseline,
                subject,
            },
            &out,
        ),
        Command::Metrics { batch, out } => commands::metrics(&batch, out.as_deref().unwrap_or(&batch)),
        Command::Serve { params, baseline, port } => commands::serve(cfg, params, baseline, port),
    }
}
