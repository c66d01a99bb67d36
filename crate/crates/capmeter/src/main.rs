use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use capmeter::experiment::{DatasetSpec, Experiment, ExperimentRecord, ExperimentSpec};
use capmeter::output::{render_run, render_sweep, Format};
use capmeter::service::{http, ServiceConfig, SessionManager};
use capmeter::sweep::{sweep, SweepPlan};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "capmeter", version, about = "Capacity measurements for small dense networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and print its measurements.
    Run {
        #[command(flatten)]
        input: InputArgs,
        /// Write the final state as an experiment record.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Train one network per width combination and rank them.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        /// Width ranges, e.g. "layer2=1..5" or "layer1=2..4,layer2=1..3".
        #[arg(long)]
        sweep: SweepPlan,
    },
    /// Serve the interactive session API.
    Serve {
        #[arg(long, env = "CAPMETER_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "CAPMETER_MAX_SESSIONS", default_value_t = 64)]
        max_sessions: usize,
        /// Epochs between metric frames for sessions created without a config.
        #[arg(long, env = "CAPMETER_CADENCE", default_value_t = 10)]
        cadence: u32,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Experiment spec or exported record (JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// CSV dataset with columns x1, x2, label.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<u64>,
    /// Seeds initialization, data generation and the train/test split.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "table")]
    format: Format,
}

/// A `--spec` file holds either an inline spec or a full record.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    Record(Box<ExperimentRecord>),
    Spec(Box<ExperimentSpec>),
}

enum Input {
    Spec(ExperimentSpec),
    Record(ExperimentRecord),
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<Input> {
        let mut input = match &self.spec {
            None => Input::Spec(ExperimentSpec::default()),
            Some(path) => {
                let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let value: serde_json::Value =
                    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
                if value.get("params").is_some() {
                    Input::Record(ExperimentRecord::from_json(&bytes)?)
                } else {
                    match serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))? {
                        SpecFile::Record(r) => Input::Record(*r),
                        SpecFile::Spec(s) => Input::Spec(*s),
                    }
                }
            }
        };
        let spec = match &mut input {
            Input::Spec(s) => s,
            Input::Record(r) => {
                if self.dataset.is_some() || self.seed.is_some() {
                    bail!("--dataset and --seed cannot override an experiment record");
                }
                &mut r.spec
            }
        };
        if let Some(path) = &self.dataset {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let dataset = capmeter::csv_io::parse_csv(&bytes)?;
            spec.dataset = DatasetSpec::from_dataset(&dataset);
        }
        if let Some(seed) = self.seed {
            spec.config.seed = seed;
            spec.split_seed = seed;
            if let DatasetSpec::Generated { seed: s, .. } = &mut spec.dataset {
                *s = seed;
            }
        }
        if let Some(epochs) = self.epochs {
            spec.epochs = epochs;
        }
        Ok(input)
    }
}

fn experiment(input: Input) -> anyhow::Result<Experiment> {
    Ok(match input {
        Input::Spec(spec) => Experiment::new(spec)?,
        Input::Record(record) => Experiment::from_record(&record)?,
    })
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run { input, export } => {
            let format = input.format;
            let mut exp = experiment(input.load()?)?;
            let report = exp.run()?;
            print!("{}", render_run(&report, format)?);
            if let Some(path) = export {
                std::fs::write(&path, exp.to_record().to_json()?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Sweep { input, sweep: plan } => {
            let format = input.format;
            let spec = match input.load()? {
                Input::Spec(s) => s,
                Input::Record(r) => r.spec,
            };
            print!("{}", render_sweep(&sweep(&spec, &plan)?, format)?);
        }
        Command::Serve { listen, max_sessions, cadence } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .init();
            let manager = SessionManager::new(ServiceConfig { max_sessions, cadence });
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(listen).await?;
                tracing::info!(addr = %listener.local_addr()?, "listening");
                axum::serve(listener, http::router(manager))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
