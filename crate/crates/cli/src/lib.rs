//! `kabc` command-line driver: config resolution, single runs and sweeps.

pub mod config;
pub mod error;
pub mod run;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

pub use config::{Command, RunSpec};
pub use error::CliError;

/// Default output root when `--out` is absent.
pub const OUT_ENV: &str = "KABC_OUT";

#[derive(Debug, Parser)]
#[command(name = "kabc", version, about = "Pseudospectral experiments for the k-abc equation family")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Integrate and write diagnostics, snapshots and a manifest
    Simulate(Args),
    /// Compare the measured crest speed with the peakon speed
    PeakonVerify(Args),
    /// Temporal convergence table against a manufactured solution
    Mms(Args),
    /// Tail decay fits along a trajectory
    DecayScan(Args),
    /// Particle paths and the momentum invariant
    Lagrangian(Args),
    /// One sub-run per point of the `[sweep]` axes, plus an aggregate table
    Sweep(Args),
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set n=1024` or `--set sweep.b=[0,1]`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory
    #[arg(long, env = OUT_ENV, default_value = "kabc-out")]
    pub out: PathBuf,
    /// Worker threads for sweeps (default: available parallelism)
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Sub {
    fn split(&self) -> (Command, &Args) {
        match self {
            Sub::Simulate(a) => (Command::Simulate, a),
            Sub::PeakonVerify(a) => (Command::PeakonVerify, a),
            Sub::Mms(a) => (Command::Mms, a),
            Sub::DecayScan(a) => (Command::DecayScan, a),
            Sub::Lagrangian(a) => (Command::Lagrangian, a),
            Sub::Sweep(a) => (Command::Sweep, a),
        }
    }
}

/// Parse, run and map the outcome to an exit status.
pub fn main_with(cli: Cli) -> i32 {
    let (cmd, args) = cli.command.split();
    match execute(cmd, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kabc: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, args: &Args) -> Result<(), CliError> {
    let raw = config::load(args.config.as_deref(), &args.set)?;
    if cmd == Command::Sweep {
        return sweep(&raw, &args.out, args.jobs);
    }
    if !raw.sweep.is_empty() {
        return Err(CliError::Config(format!("`[sweep]` axes need the sweep command, not {}", cmd.as_str())));
    }
    let spec = config::resolve(&raw.table)?;
    let out = run::run(cmd, &spec, &args.out)?;
    match out.blow_up {
        Some(msg) => Err(CliError::BlowUp(msg)),
        None => Ok(()),
    }
}

fn sweep(raw: &config::RawConfig, out: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    if raw.sweep.is_empty() {
        return Err(CliError::Config("sweep needs at least one `[sweep]` axis".into()));
    }
    let cmd = raw.sweep_command.unwrap_or(Command::Simulate);
    // resolve every point up front so a bad axis value fails before any run
    let specs = config::expand(raw)
        .iter()
        .enumerate()
        .map(|(i, t)| config::resolve(t).map_err(|e| CliError::Config(format!("sweep point {i}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<run::RunOutput, CliError>> =
        pool.install(|| specs.par_iter().enumerate().map(|(i, s)| run::run(cmd, s, &run::run_dir(out, i))).collect());

    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut header = vec!["run"];
    header.extend_from_slice(run::SUMMARY_HEADER);
    w.write_record(&header)?;
    let mut worst: Option<CliError> = None;
    let mut runs = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let name = format!("run_{i:04}");
        let status = match r {
            Ok(o) => {
                let mut row = vec![name.clone()];
                row.extend(o.summary);
                w.write_record(&row)?;
                match o.blow_up {
                    Some(m) => {
                        worst = pick(worst, CliError::BlowUp(format!("{name}: {m}")));
                        "blow_up".to_string()
                    }
                    None => "ok".to_string(),
                }
            }
            Err(e) => {
                let s = e.to_string();
                worst = pick(worst, e);
                s
            }
        };
        runs.push(json!({ "run": name, "status": status }));
    }
    w.flush()?;
    let axes: serde_json::Map<String, serde_json::Value> = raw
        .sweep
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null)))
        .collect();
    run::write_json(
        &out.join("manifest.json"),
        &json!({
            "schema_version": run::SCHEMA_VERSION,
            "version": env!("CARGO_PKG_VERSION"),
            "command": "sweep",
            "sub_command": cmd.as_str(),
            "axes": axes,
            "runs": runs,
        }),
    )?;
    match worst {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Keep the error with the highest exit status.
fn pick(cur: Option<CliError>, new: CliError) -> Option<CliError> {
    match cur {
        Some(c) if c.exit_code() >= new.exit_code() => Some(c),
        _ => Some(new),
    }
}
