mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::Experiment;
use crate::output::{json_bytes, Artifact};

#[derive(Parser)]
#[command(
    name = "magvirial",
    version,
    about = "Virial identity, smoothing and Hardy checks for the magnetic Schrödinger equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "MAGVIRIAL_THREADS")]
    threads: Option<usize>,
    /// Seed for randomized test states.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Propagate the initial data and dump snapshots.
    Simulate,
    /// Virial terms and residuals along the trajectory.
    VirialCheck,
    /// Smoothing functional against the data norm for each radius.
    SmoothingEstimate,
    /// Hardy ratio for the data, its snapshots and random states.
    HardyCheck,
    /// Tabulate the multiplier and check its bounds.
    MultiplierTable,
    /// Check the hypotheses on the potentials.
    AssumptionsCheck,
    /// Compare solutions before and after a gauge transformation.
    GaugeCheck,
    /// Distance between the time stepper and the dense exponential.
    OracleCompare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VirialCheck => "virial-check",
            Command::SmoothingEstimate => "smoothing-estimate",
            Command::HardyCheck => "hardy-check",
            Command::MultiplierTable => "multiplier-table",
            Command::AssumptionsCheck => "assumptions-check",
            Command::GaugeCheck => "gauge-check",
            Command::OracleCompare => "oracle-compare",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Assumptions(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Assumptions(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("config error: {m}"),
            Failure::Assumptions(m) => format!("assumptions failed: {m}"),
            Failure::Numerical(m) => format!("numerical failure: {m}"),
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let bytes =
        std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let exp = config::load(&bytes)?;
    let out = cli
        .out
        .clone()
        .or_else(|| exp.config.output.directory.clone())
        .ok_or_else(|| Failure::Config("output.directory: missing (or pass --out)".into()))?;

    let report = match cli.command {
        Command::Simulate => commands::simulate(&exp),
        Command::VirialCheck => commands::virial_check(&exp),
        Command::SmoothingEstimate => commands::smoothing_estimate(&exp),
        Command::HardyCheck => commands::hardy(&exp, cli.seed),
        Command::MultiplierTable => commands::multiplier_table(&exp),
        Command::AssumptionsCheck => commands::assumptions(&exp),
        Command::GaugeCheck => commands::gauge(&exp),
        Command::OracleCompare => commands::oracle_compare(&exp),
    }?;

    let mut artifacts = report.artifacts;
    artifacts.push(Artifact {
        name: "summary.json".into(),
        bytes: json_bytes(&report.summary),
    });
    artifacts.push(Artifact {
        name: "manifest.json".into(),
        bytes: json_bytes(&manifest(&exp, cli, start.elapsed().as_secs_f64())),
    });
    output::write_all(&out, &artifacts)
        .map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
    println!("{}", serde_json::to_string(&report.summary).unwrap());
    match report.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn manifest(exp: &Experiment, cli: &Cli, wall_time_s: f64) -> serde_json::Value {
    let g = &exp.grid;
    json!({
        "subcommand": cli.command.name(),
        "config_sha256": exp.sha256,
        "grid": { "n": g.dim(), "extent": g.extent(), "points": g.points(), "spacing": g.spacing() },
        "dt": exp.dt(),
        "horizon": exp.horizon(),
        "tolerances": {
            "solver": exp.config.solver,
            "virial_residual": commands::VIRIAL_TOLERANCE,
            "gauge_field": commands::GAUGE_FIELD_TOLERANCE,
            "gauge_l2": commands::GAUGE_L2_TOLERANCE,
        },
        "versions": { "magvirial": env!("CARGO_PKG_VERSION") },
        "seed": cli.seed,
        "threads": rayon::current_num_threads(),
        "wall_time_s": wall_time_s,
    })
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
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("magvirial: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
