//! `homvol`: estimates, diagrams, efficiency curves and simulations for
//! homogeneous OHLC volatility estimators.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod io;
mod manifest;
mod options;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::*;
use error::{CliError, CliResult};
use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "homvol", version, about = "Homogeneous OHLC volatility estimators")]
struct Cli {
    /// Log more; repeat for debug output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate variance and volatility from each bar of a CSV file.
    Estimate(EstimateArgs),
    /// Efficiency bounds and estimator moments as functions of the drift.
    Curves(CurvesArgs),
    /// Tabulate one estimator diagram on the admissible domain.
    Diagram(DiagramArgs),
    /// Density of one estimator at a fixed drift.
    Pdf(PdfArgs),
    /// Solve for a quasi-unbiased estimator and its moment curves.
    Quasi(QuasiArgs),
    /// Monte Carlo moments of estimators on discretely sampled paths.
    Simulate(SimulateArgs),
    /// Maximum-likelihood drift and volatility for each bar.
    Mle(MleArgs),
    /// Rerun a command from its manifest.
    Replay {
        manifest: PathBuf,
        /// Write to this path instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs `f`, then records the manifest next to the primary output.
fn run<A: Serialize>(
    name: &str,
    args: &A,
    out: &std::path::Path,
    seed: Option<u64>,
    f: impl FnOnce(&A) -> CliResult<Vec<PathBuf>>,
) -> CliResult<()> {
    let start = Instant::now();
    let mut m = RunManifest::new(name, args, seed)?;
    m.outputs = f(args)?;
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(out)?;
    log::info!("{name}: wrote {} in {:.3} s", out.display(), m.wall_time);
    Ok(())
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Estimate(a) => run("estimate", &a, &a.out.clone(), None, estimate),
        Command::Curves(a) => run("curves", &a, &a.out.clone(), None, curves),
        Command::Diagram(a) => run("diagram", &a, &a.out.clone(), None, diagram),
        Command::Pdf(a) => run("pdf", &a, &a.out.clone(), None, pdf),
        Command::Quasi(a) => run("quasi", &a, &a.out.clone(), None, quasi),
        Command::Simulate(a) => run("simulate", &a, &a.out.clone(), Some(a.seed), simulate),
        Command::Mle(a) => run("mle", &a, &a.out.clone(), None, mle),
        Command::Replay { manifest, out } => replay(&manifest, out),
    }
}

fn replay(path: &std::path::Path, out: Option<PathBuf>) -> CliResult<()> {
    let m = RunManifest::read(path)?;
    let mut p = m.parameters.clone();
    if let Some(o) = out {
        let obj = p.as_object_mut().ok_or_else(|| CliError::Input("manifest parameters are not an object".into()))?;
        obj.insert("out".into(), serde_json::Value::String(o.to_string_lossy().into_owned()));
        // A derived curve path follows the new output.
        if obj.contains_key("curve_out") {
            obj.insert("curve_out".into(), serde_json::Value::Null);
        }
    }
    let cmd = match m.command.as_str() {
        "estimate" => Command::Estimate(serde_json::from_value(p)?),
        "curves" => Command::Curves(serde_json::from_value(p)?),
        "diagram" => Command::Diagram(serde_json::from_value(p)?),
        "pdf" => Command::Pdf(serde_json::from_value(p)?),
        "quasi" => Command::Quasi(serde_json::from_value(p)?),
        "simulate" => Command::Simulate(serde_json::from_value(p)?),
        "mle" => Command::Mle(serde_json::from_value(p)?),
        other => return Err(CliError::Input(format!("unknown command '{other}' in manifest"))),
    };
    if m.tool_version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest was written by version {}", m.tool_version);
    }
    dispatch(cmd)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("HOMVOL_LOG").init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("homvol: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
