//! Subcommand execution. Every run writes `summary.csv` and `manifest.json`
//! into its output directory, blow-ups included.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use kabc_core::diagnostics::{crest_position, crest_track, h1_drift, persistence_report, PersistenceReport};
use kabc_core::dynamics::{mms_forcing, ManufacturedSolution, SimulationError, TravelingSine};
use kabc_core::exact::{mollified_profile, PeakonSpec, Shape};
use kabc_core::io::{read_snapshot, write_snapshot};
use kabc_core::lagrangian::{advect, conservation_records};
use kabc_core::params::h1_conservation;
use kabc_core::{Error, Field, SimConfig, Trajectory};
use serde_json::{json, Value};

use crate::config::{Command, DomainKind, Profile, RunSpec};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_HEADER: &[&str] = &[
    "command",
    "k",
    "a",
    "b",
    "c",
    "n",
    "length",
    "t_end",
    "status",
    "final_time",
    "steps",
    "hs_sup",
    "hs_bound",
    "h1_drift",
    "metric_name",
    "metric",
];

pub const DIAGNOSTICS_HEADER: &[&str] =
    &["t", "hs_norm", "h1_sq", "dt", "crest_x", "theta_hat_u", "theta_hat_ux", "r2", "floor_hit"];

pub const PARTICLES_HEADER: &[&str] = &["seed", "t", "eta", "eta_x", "m_along", "invariant_residual"];

/// Round-trip formatting; `{:?}` keeps exponents for tiny and huge values.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// What a finished (or blown-up) run reports.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One summary record, as written to `summary.csv`.
    pub summary: Vec<String>,
    pub blow_up: Option<String>,
}

struct Report {
    traj: Option<Trajectory>,
    metric: (&'static str, f64),
    outputs: Vec<String>,
    blow_up: Option<(f64, f64)>,
    extra: Value,
}

impl Report {
    fn new(traj: Trajectory, metric: (&'static str, f64), blow_up: Option<(f64, f64)>) -> Self {
        Report { traj: Some(traj), metric, outputs: Vec::new(), blow_up, extra: Value::Null }
    }
}

pub fn initial_data(spec: &RunSpec) -> Result<Field, CliError> {
    let g = spec.grid;
    let c = g.center();
    let u0 = match &spec.profile {
        Profile::Peakon { gamma } => match spec.domain {
            DomainKind::Line => mollified_profile(Shape::Peakon { gamma: *gamma }, spec.moll_width, &g)?,
            DomainKind::Circle => {
                if (g.length() - 2.0 * PI).abs() > 1e-12 {
                    return Err(CliError::Config("the circle peakon needs `length` = 2π".into()));
                }
                let pk = PeakonSpec::circle(*gamma, spec.params)?;
                Field::from_fn(g, |x| pk.eval(x - c, 0.0))
            }
        },
        Profile::ExpTail { theta } => mollified_profile(Shape::ExpTail { theta: *theta }, spec.moll_width, &g)?,
        Profile::Bump { width } => mollified_profile(Shape::Bump { width: *width }, spec.moll_width, &g)?,
        Profile::Wave { offset, amplitude } => {
            let kappa = 2.0 * PI / g.length();
            Field::from_fn(g, |x| offset + amplitude * (kappa * x).cos())
        }
        Profile::Zero => Field::zeros(g),
        Profile::File(path) => read_snapshot(path, &g)?,
    };
    Ok(u0)
}

/// Integrate, keeping the partial trajectory on blow-up.
fn integrate(cfg: &SimConfig, u0: &Field) -> Result<(Trajectory, Option<(f64, f64)>), CliError> {
    match kabc_core::simulate(cfg, u0) {
        Ok(t) => Ok((t, None)),
        Err(SimulationError::BlowUp { time, last_good_time, partial }) => Ok((*partial, Some((time, last_good_time)))),
        Err(SimulationError::Config(e)) => Err(e.into()),
    }
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, CliError> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn dominant_is_max(u: &Field) -> bool {
    let max = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
    max.abs() >= min.abs()
}

fn write_diagnostics(dir: &Path, spec: &RunSpec, traj: &Trajectory) -> Result<(), CliError> {
    // fits need a usable window; without one the columns stay empty
    let report = persistence_report(traj, spec.decay_theta, spec.window, spec.side).ok();
    let use_max = dominant_is_max(&traj.snapshots[0]);
    let mut w = writer(dir, "diagnostics.csv")?;
    w.write_record(DIAGNOSTICS_HEADER)?;
    let mut snap = 0;
    for s in &traj.steps {
        let mut row = vec![num(s.t), num(s.hs_norm), num(s.h1_sq), num(s.dt)];
        if snap < traj.times.len() && traj.times[snap] == s.t {
            row.push(opt(crest_position(&traj.snapshots[snap], use_max)));
            match report.as_ref().map(|r| &r.entries[snap]) {
                Some(e) => {
                    let r2 = match (e.u.r2, e.ux.r2) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                    row.extend([opt(e.u.theta_hat), opt(e.ux.theta_hat), opt(r2), (e.u.floor_hit || e.ux.floor_hit).to_string()]);
                }
                None => row.extend([String::new(), String::new(), String::new(), String::new()]),
            }
            snap += 1;
        } else {
            row.extend([String::new(), String::new(), String::new(), String::new(), String::new()]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_snapshots(dir: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let sub = dir.join("snapshots");
    fs::create_dir_all(&sub)?;
    let mut w = writer(&sub, "times.csv")?;
    w.write_record(["index", "t"])?;
    for (i, (t, u)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
        write_snapshot(u, &sub.join(format!("u_{i:05}.csv")))?;
        w.write_record([i.to_string(), num(*t)])?;
    }
    w.flush()?;
    Ok(())
}

fn simulate_cmd(dir: &Path, spec: &RunSpec) -> Result<Report, CliError> {
    let (traj, blow) = integrate(&spec.sim_config(), &initial_data(spec)?)?;
    write_diagnostics(dir, spec, &traj)?;
    let mut outputs = vec!["diagnostics.csv".to_string()];
    if spec.write_snapshots {
        write_snapshots(dir, &traj)?;
        outputs.push("snapshots/".into());
    }
    let drift = h1_drift(&traj).unwrap_or(f64::NAN);
    Ok(Report { outputs, ..Report::new(traj, ("h1_drift", drift), blow) })
}

fn peakon_cmd(dir: &Path, spec: &RunSpec) -> Result<Report, CliError> {
    let Profile::Peakon { gamma } = spec.profile else {
        return Err(CliError::Config("peakon-verify needs `profile` = \"peakon\"".into()));
    };
    let pk = match spec.domain {
        DomainKind::Line => PeakonSpec::line(gamma, spec.params)?,
        DomainKind::Circle => PeakonSpec::circle(gamma, spec.params)?,
    };
    let (traj, blow) = integrate(&spec.sim_config(), &initial_data(spec)?)?;
    let expected = pk.speed();
    let measured = match crest_track(&traj) {
        Ok(track) => track.speed,
        Err(Error::AmbiguousCrest { time }) if blow.is_none() => {
            return Err(CliError::Config(format!("crest became ambiguous at t = {time}")))
        }
        Err(_) => f64::NAN,
    };
    let rel = (measured - expected) / expected;
    let mut w = writer(dir, "peakon.csv")?;
    w.write_record(["preset", "k", "a", "b", "c", "gamma", "moll_width", "expected_speed", "measured_speed", "rel_error"])?;
    w.write_record([
        spec.preset.map(|p| p.to_string()).unwrap_or_default(),
        spec.params.k().to_string(),
        num(spec.params.a()),
        num(spec.params.b()),
        num(spec.params.c()),
        num(gamma),
        num(spec.moll_width),
        num(expected),
        num(measured),
        num(rel),
    ])?;
    w.flush()?;
    write_diagnostics(dir, spec, &traj)?;
    let mut r = Report::new(traj, ("speed_rel_error", rel), blow);
    r.outputs = vec!["peakon.csv".into(), "diagnostics.csv".into()];
    r.extra = json!({ "expected_speed": expected, "measured_speed": measured });
    Ok(r)
}

fn mms_cmd(dir: &Path, spec: &RunSpec) -> Result<Report, CliError> {
    let g = spec.grid;
    let periods = spec.mms_wavenumber * g.length() / (2.0 * PI);
    if (periods - periods.round()).abs() > 1e-9 || periods.round() < 1.0 {
        return Err(CliError::Config(format!(
            "mms_wavenumber {} does not fit the box of length {}",
            spec.mms_wavenumber,
            g.length()
        )));
    }
    let star = TravelingSine { amplitude: spec.mms_amplitude, wavenumber: spec.mms_wavenumber, speed: spec.mms_speed };
    let u0 = Field::from_fn(g, |x| star.value(x, 0.0));
    let forcing = mms_forcing(Arc::new(star), &spec.params);
    let mut w = writer(dir, "mms.csv")?;
    w.write_record(["level", "dt_max", "error", "order"])?;
    let mut prev: Option<f64> = None;
    let mut last = None;
    let mut order = f64::NAN;
    for level in 0..spec.mms_levels {
        let dt_max = spec.dt_max / 2f64.powi(level as i32);
        let cfg = SimConfig { dt_max, forcing: Some(forcing.clone()), ..spec.sim_config() };
        let (traj, blow) = integrate(&cfg, &u0)?;
        let t = traj.final_time();
        let exact = Field::from_fn(g, |x| star.value(x, t));
        let err = traj.final_snapshot().values().iter().zip(exact.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let ord = prev.map(|p| (p / err).log2());
        w.write_record([level.to_string(), num(dt_max), num(err), opt(ord)])?;
        prev = Some(err);
        order = ord.unwrap_or(f64::NAN);
        last = Some((traj, blow));
        if blow.is_some() {
            break;
        }
    }
    w.flush()?;
    let (traj, blow) = last.expect("at least two levels");
    let mut r = Report::new(traj, ("finest_order", order), blow);
    r.outputs = vec!["mms.csv".into()];
    Ok(r)
}

fn decay_rows(dir: &Path, report: &PersistenceReport) -> Result<(), CliError> {
    let mut w = writer(dir, "decay.csv")?;
    w.write_record(["t", "theta_hat_u", "theta_hat_ux", "r2", "floor_hit"])?;
    for e in &report.entries {
        let r2 = match (e.u.r2, e.ux.r2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        w.write_record([num(e.t), opt(e.u.theta_hat), opt(e.ux.theta_hat), opt(r2), (e.u.floor_hit || e.ux.floor_hit).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn decay_cmd(dir: &Path, spec: &RunSpec) -> Result<Report, CliError> {
    let (traj, blow) = integrate(&spec.sim_config(), &initial_data(spec)?)?;
    let report = persistence_report(&traj, spec.decay_theta, spec.window, spec.side)?;
    decay_rows(dir, &report)?;
    let min = report.min_theta_u().unwrap_or(f64::NAN);
    let mut r = Report::new(traj, ("min_theta_hat_u", min), blow);
    r.outputs = vec!["decay.csv".into()];
    r.extra = json!({
        "decay_theta": spec.decay_theta,
        "window": report.entries.first().map(|e| [e.u.window.0, e.u.window.1]),
        "min_theta_hat_ux": report.min_theta_ux(),
        "min_r2": report.min_r2(),
        "floor_hit": report.any_floor_hit(),
        "persists": report.persists(),
    });
    Ok(r)
}

fn lagrangian_cmd(dir: &Path, spec: &RunSpec) -> Result<Report, CliError> {
    if !spec.params.is_gkbch() {
        return Err(Error::NotGkbch.into());
    }
    let (traj, blow) = integrate(&spec.sim_config(), &initial_data(spec)?)?;
    let ps = advect(&traj, &spec.seeds)?;
    let records = conservation_records(&traj, &ps, &spec.params)?;
    let mut w = writer(dir, "particles.csv")?;
    w.write_record(PARTICLES_HEADER)?;
    for r in &records {
        w.write_record([num(r.seed), num(r.t), num(r.eta), num(r.eta_x), num(r.m_along), num(r.invariant_residual)])?;
    }
    w.flush()?;
    let residual = records.iter().fold(0.0f64, |m, r| m.max(r.invariant_residual));
    let mut r = Report::new(traj, ("invariant_residual", residual), blow);
    r.outputs = vec!["particles.csv".into()];
    r.extra = json!({ "left_core": ps.left_core });
    Ok(r)
}

fn summary_row(cmd: Command, spec: &RunSpec, report: &Report) -> Vec<String> {
    let p = &spec.params;
    let (final_time, steps, hs_sup, hs_bound, drift) = match &report.traj {
        Some(t) => (
            num(t.final_time()),
            (t.steps.len() - 1).to_string(),
            num(t.hs_sup()),
            num(t.hs_bound),
            h1_drift(t).map(num).unwrap_or_default(),
        ),
        None => Default::default(),
    };
    vec![
        cmd.as_str().into(),
        p.k().to_string(),
        num(p.a()),
        num(p.b()),
        num(p.c()),
        spec.grid.n().to_string(),
        num(spec.grid.length()),
        num(spec.t_end),
        if report.blow_up.is_some() { "blow_up" } else { "ok" }.into(),
        final_time,
        steps,
        hs_sup,
        hs_bound,
        drift,
        report.metric.0.into(),
        num(report.metric.1),
    ]
}

fn manifest(cmd: Command, spec: &RunSpec, report: &Report, started: SystemTime, wall: f64) -> Value {
    let p = &spec.params;
    let h1 = h1_conservation(p);
    let growth = report.traj.as_ref().map(|t| {
        json!({
            "sobolev_order": t.sobolev_order,
            "factor": 2f64.powf(1.0 + 1.0 / p.k() as f64),
            "hs_sup": t.hs_sup(),
            "hs_bound": t.hs_bound,
            "exceeded_at": t.hs_bound_exceeded_at,
            "within_bound": t.hs_bound_exceeded_at.is_none(),
        })
    });
    json!({
        "schema_version": SCHEMA_VERSION,
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.as_str(),
        "status": if report.blow_up.is_some() { "blow_up" } else { "ok" },
        "params": {
            "preset": spec.preset.map(|n| n.to_string()),
            "k": p.k(),
            "a": p.a(),
            "b": p.b(),
            "c": p.c(),
        },
        "grid": {
            "domain": match spec.domain { DomainKind::Line => "line", DomainKind::Circle => "circle" },
            "n": spec.grid.n(),
            "length": spec.grid.length(),
            "dx": spec.grid.dx(),
        },
        "config": serde_json::to_value(&spec.resolved).unwrap_or(Value::Null),
        "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_time_s": wall,
        "h1_conservation": {
            "predicted": h1.conserved,
            "extrapolated": h1.extrapolated,
            "measured_drift": report.traj.as_ref().and_then(|t| h1_drift(t).ok()),
        },
        "growth_bound": growth,
        "blow_up": report.blow_up.map(|(time, last)| json!({ "time": time, "last_good_time": last })),
        "metric": { "name": report.metric.0, "value": report.metric.1 },
        "details": report.extra,
        "outputs": report.outputs,
    })
}

pub fn write_summary(path: &Path, row: &[String]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_record(SUMMARY_HEADER)?;
    w.write_record(row)?;
    w.flush()?;
    Ok(())
}

/// Run one non-sweep command into `dir`.
pub fn run(cmd: Command, spec: &RunSpec, dir: &Path) -> Result<RunOutput, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut report = match cmd {
        Command::Simulate => simulate_cmd(dir, spec)?,
        Command::PeakonVerify => peakon_cmd(dir, spec)?,
        Command::Mms => mms_cmd(dir, spec)?,
        Command::DecayScan => decay_cmd(dir, spec)?,
        Command::Lagrangian => lagrangian_cmd(dir, spec)?,
        Command::Sweep => return Err(CliError::Config("sweeps cannot nest".into())),
    };
    report.outputs.extend(["summary.csv".to_string(), "manifest.json".to_string()]);
    let summary = summary_row(cmd, spec, &report);
    write_summary(&dir.join("summary.csv"), &summary)?;
    let m = manifest(cmd, spec, &report, started, clock.elapsed().as_secs_f64());
    write_json(&dir.join("manifest.json"), &m)?;
    let blow_up = report.blow_up.map(|(time, last)| format!("at t = {time} (last good state at t = {last})"));
    Ok(RunOutput { summary, blow_up })
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("run_{index:04}"))
}
