use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fliqc_core::Outcome;
use fliqc_harness::batch::write_metrics_csv;
use fliqc_harness::{export_trace, load_scenario, metrics, run_batch, run_scenario, HarnessError, TraceFormat};
use fliqc_service::{Session, SessionConfig};

const EXIT_VALIDATION: u8 = 2;
const EXIT_PLANNING: u8 = 3;

#[derive(Parser)]
#[command(name = "fliqc", version, about = "Reactive collision-avoiding motion planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario from its start to its goal.
    Run {
        scenario: PathBuf,
        /// Write a per-step trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Trace format; inferred from the trace extension when omitted.
        #[arg(long)]
        format: Option<TraceFormat>,
    },
    /// Plan many sampled start/goal pairs and write one metrics row per run.
    Batch {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Sampling seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve an interactive session over a websocket.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 250.0)]
        tick_rate: f64,
        #[arg(long, default_value_t = 0.9)]
        filter_a: f64,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

enum Failure {
    Validation(String),
    Planning(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Planning(e.to_string())
        }
    }
}

fn run(scenario: PathBuf, trace: Option<PathBuf>, format: Option<TraceFormat>) -> Result<(), Failure> {
    let sc = load_scenario(&scenario)?;
    let traj = run_scenario(&sc)?;
    if let Some(path) = &trace {
        let format = format.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
            Some("json") => TraceFormat::Json,
            _ => TraceFormat::Csv,
        });
        export_trace(&traj, path, format).map_err(|e| Failure::Planning(e.to_string()))?;
    }
    let row = metrics(&traj, &sc.id, 0);
    println!("{}", serde_json::to_string_pretty(&row).expect("metrics serialize"));
    match traj.outcome {
        Outcome::ReachedGoal => Ok(()),
        other => Err(Failure::Planning(format!("planning ended with {other:?} after {} steps", traj.steps.len()))),
    }
}

fn batch(scenario: PathBuf, runs: usize, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let sc = load_scenario(&scenario)?;
    let report = run_batch(&sc, runs, seed.unwrap_or(sc.seed))?;
    if let Some(out) = out {
        write_metrics_csv(&report.rows, &out).map_err(|e| Failure::Planning(e.to_string()))?;
    }
    println!("{}", serde_json::to_string_pretty(&report.aggregate).expect("aggregate serialize"));
    Ok(())
}

fn serve(scenario: PathBuf, addr: SocketAddr, cfg: SessionConfig) -> Result<(), Failure> {
    let sc = load_scenario(&scenario)?;
    let session = Session::new(sc, cfg).map_err(Failure::Validation)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Planning(e.to_string()))?;
    rt.block_on(async {
        let svc = fliqc_service::spawn(session, addr)
            .await
            .map_err(|e| Failure::Validation(e.to_string()))?;
        println!("serving on ws://{}/ws", svc.addr);
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {
                svc.shutdown().await;
                Ok(())
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, trace, format } => run(scenario, trace, format),
        Command::Batch { scenario, runs, seed, out } => batch(scenario, runs, seed, out),
        Command::Serve { scenario, port, tick_rate, filter_a, host } => {
            serve(scenario, SocketAddr::new(host, port), SessionConfig { tick_rate, filter_a })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Planning(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PLANNING)
        }
    }
}
