//! Run configuration: a flat TOML table of keys, an optional `[sweep]`
//! table of axis arrays, and `--set key=value` overrides.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use kabc_core::diagnostics::Side;
use kabc_core::dynamics::DEFAULT_SOBOLEV_ORDER;
use kabc_core::exact::default_moll_width;
use kabc_core::params::{validate, Params, Preset, PresetName};
use kabc_core::spectral::{Grid, SpectralFilter, LINE_LENGTH};
use kabc_core::SimConfig;
use toml::{Table, Value};

use crate::error::CliError;

/// Every key a config file may contain, outside `[sweep]`.
pub const KEYS: &[&str] = &[
    "preset",
    "k",
    "a",
    "b",
    "c",
    "domain",
    "n",
    "length",
    "profile",
    "gamma",
    "theta",
    "width",
    "moll_width",
    "offset",
    "amplitude",
    "profile_file",
    "t_end",
    "cfl_safety",
    "dt_max",
    "output_stride",
    "sobolev_order",
    "filter",
    "write_snapshots",
    "decay_theta",
    "window_lo",
    "window_hi",
    "side",
    "seeds",
    "mms_levels",
    "mms_amplitude",
    "mms_wavenumber",
    "mms_speed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    PeakonVerify,
    Mms,
    DecayScan,
    Lagrangian,
    Sweep,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::PeakonVerify => "peakon-verify",
            Command::Mms => "mms",
            Command::DecayScan => "decay-scan",
            Command::Lagrangian => "lagrangian",
            Command::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "simulate" => Command::Simulate,
            "peakon-verify" => Command::PeakonVerify,
            "mms" => Command::Mms,
            "decay-scan" => Command::DecayScan,
            "lagrangian" => Command::Lagrangian,
            "sweep" => Command::Sweep,
            other => return Err(CliError::Config(format!("unknown command `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Line,
    Circle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Peakon { gamma: f64 },
    ExpTail { theta: f64 },
    Bump { width: f64 },
    /// `offset + amplitude cos(2π x / L)`
    Wave { offset: f64, amplitude: f64 },
    Zero,
    File(PathBuf),
}

/// A fully resolved single run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub preset: Option<PresetName>,
    pub params: Params,
    pub domain: DomainKind,
    pub grid: Grid,
    pub profile: Profile,
    pub moll_width: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub output_stride: usize,
    pub sobolev_order: f64,
    pub filter: bool,
    pub write_snapshots: bool,
    pub decay_theta: f64,
    pub window: Option<(f64, f64)>,
    pub side: Side,
    pub seeds: Vec<f64>,
    pub mms_levels: usize,
    pub mms_amplitude: f64,
    pub mms_wavenumber: f64,
    pub mms_speed: f64,
    /// The table this spec was resolved from, defaults filled in.
    pub resolved: Table,
}

impl RunSpec {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            cfl_safety: self.cfl_safety,
            dt_max: self.dt_max,
            output_stride: self.output_stride,
            filter: self.filter.then(SpectralFilter::default),
            sobolev_order: self.sobolev_order,
            ..SimConfig::new(self.params, self.grid, self.t_end)
        }
    }
}

/// Raw config: top-level keys plus sweep axes.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub table: Table,
    pub sweep: Vec<(String, Vec<Value>)>,
    pub sweep_command: Option<Command>,
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RawConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            parse_table(&text)?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    split(table)
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Config(format!("malformed config: {e}")))
}

/// `key=value` with `value` read as a TOML value, or as a bare string if it
/// does not parse. Dotted keys address sub-tables (`sweep.b=[0, 1]`).
pub fn apply_override(table: &mut Table, text: &str) -> Result<(), CliError> {
    let (key, raw) =
        text.split_once('=').ok_or_else(|| CliError::Config(format!("override `{text}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in `{text}`")))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn split(mut table: Table) -> Result<RawConfig, CliError> {
    let mut raw = RawConfig::default();
    if let Some(sweep) = table.remove("sweep") {
        let Value::Table(sweep) = sweep else {
            return Err(CliError::Config("`sweep` must be a table".into()));
        };
        for (key, v) in sweep {
            if key == "command" {
                let s = v.as_str().ok_or_else(|| CliError::Config("sweep.command must be a string".into()))?;
                let cmd = Command::parse(s)?;
                if cmd == Command::Sweep {
                    return Err(CliError::Config("sweep.command cannot be `sweep`".into()));
                }
                raw.sweep_command = Some(cmd);
                continue;
            }
            let Value::Array(values) = v else {
                return Err(CliError::Config(format!("sweep axis `{key}` must be an array")));
            };
            if values.is_empty() {
                return Err(CliError::Config(format!("sweep axis `{key}` is empty")));
            }
            raw.sweep.push((key, values));
        }
    }
    let mut unknown: Vec<&str> = table.keys().map(String::as_str).filter(|k| !KEYS.contains(k)).collect();
    unknown.extend(raw.sweep.iter().map(|(k, _)| k.as_str()).filter(|k| !KEYS.contains(k)));
    if !unknown.is_empty() {
        let unknown: BTreeSet<&str> = unknown.into_iter().collect();
        return Err(CliError::Config(format!(
            "unknown config keys: {}",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    raw.table = table;
    Ok(raw)
}

/// Cartesian product of the sweep axes in key order, first axis slowest. Each point is
/// the base table with the axis values substituted.
pub fn expand(raw: &RawConfig) -> Vec<Table> {
    let mut points = vec![raw.table.clone()];
    for (key, values) in &raw.sweep {
        points = points
            .into_iter()
            .flat_map(|t| {
                values.iter().map(move |v| {
                    let mut t = t.clone();
                    t.insert(key.clone(), v.clone());
                    t
                })
            })
            .collect();
    }
    points
}

struct Reader<'a> {
    table: &'a Table,
    resolved: Table,
}

impl<'a> Reader<'a> {
    fn float(&mut self, key: &str, default: Option<f64>) -> Result<Option<f64>, CliError> {
        let v = match self.table.get(key) {
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(Value::String(s)) => {
                Some(s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("`{key}` must be a number, got \"{s}\"")))?)
            }
            Some(other) => return Err(CliError::Config(format!("`{key}` must be a number, got {other}"))),
            None => default,
        };
        if let Some(f) = v {
            if !f.is_finite() {
                return Err(CliError::Config(format!("`{key}` must be finite, got {f}")));
            }
            self.resolved.insert(key.into(), Value::Float(f));
        }
        Ok(v)
    }

    fn req_float(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.float(key, Some(default))?.expect("defaulted"))
    }

    fn int(&mut self, key: &str, default: Option<i64>) -> Result<Option<i64>, CliError> {
        let v = match self.table.get(key) {
            Some(Value::Integer(i)) => Some(*i),
            Some(Value::Float(f)) if f.fract() == 0.0 && f.abs() < 9e15 => Some(*f as i64),
            Some(other) => return Err(CliError::Config(format!("`{key}` must be an integer, got {other}"))),
            None => default,
        };
        if let Some(i) = v {
            self.resolved.insert(key.into(), Value::Integer(i));
        }
        Ok(v)
    }

    fn count(&mut self, key: &str, default: i64) -> Result<usize, CliError> {
        let i = self.int(key, Some(default))?.expect("defaulted");
        usize::try_from(i).map_err(|_| CliError::Config(format!("`{key}` must be non-negative, got {i}")))
    }

    fn string(&mut self, key: &str, default: Option<&str>) -> Result<Option<String>, CliError> {
        let v = match self.table.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => return Err(CliError::Config(format!("`{key}` must be a string, got {other}"))),
            None => default.map(String::from),
        };
        if let Some(s) = &v {
            self.resolved.insert(key.into(), Value::String(s.clone()));
        }
        Ok(v)
    }

    fn boolean(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        let v = match self.table.get(key) {
            Some(Value::Boolean(b)) => *b,
            Some(other) => return Err(CliError::Config(format!("`{key}` must be true or false, got {other}"))),
            None => default,
        };
        self.resolved.insert(key.into(), Value::Boolean(v));
        Ok(v)
    }

    fn float_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.table.get(key) else { return Ok(None) };
        let Value::Array(items) = v else {
            return Err(CliError::Config(format!("`{key}` must be an array of numbers")));
        };
        let out = items
            .iter()
            .map(|v| match v {
                Value::Float(f) if f.is_finite() => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                other => Err(CliError::Config(format!("`{key}` entries must be finite numbers, got {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.resolved.insert(key.into(), Value::Array(out.iter().map(|&f| Value::Float(f)).collect()));
        Ok(Some(out))
    }
}

fn resolve_params(r: &mut Reader<'_>) -> Result<(Option<PresetName>, Params), CliError> {
    let name = r.string("preset", None)?.map(|s| s.parse::<PresetName>()).transpose()?;
    let need = |r: &mut Reader<'_>, key: &str, preset: &str| {
        r.float(key, None)?.ok_or_else(|| CliError::Config(format!("preset `{preset}` needs `{key}`")))
    };
    let params = match name {
        None => {
            let k = r.int("k", None)?.ok_or_else(|| CliError::Config("set `preset` or all of k, a, b, c".into()))?;
            let a = need(r, "a", "explicit")?;
            let b = need(r, "b", "explicit")?;
            let c = need(r, "c", "explicit")?;
            validate(k, a, b, c)?
        }
        Some(name) => {
            let preset = match name {
                PresetName::Ch => Preset::Ch,
                PresetName::Dp => Preset::Dp,
                PresetName::Novikov => Preset::Novikov,
                PresetName::Forq => Preset::Forq,
                PresetName::Ab => Preset::Ab { a: need(r, "a", "ab")?, b: need(r, "b", "ab")? },
                PresetName::Gkbch => Preset::Gkbch {
                    k: r.int("k", None)?.ok_or_else(|| CliError::Config("preset `gkbch` needs `k`".into()))?,
                    b: need(r, "b", "gkbch")?,
                },
                PresetName::Bfam => Preset::Bfam { b: need(r, "b", "bfam")? },
            };
            let p = preset.params()?;
            // fixed presets ignore stray quadruple keys only if they agree
            for (key, v) in [("a", p.a()), ("b", p.b()), ("c", p.c())] {
                if let Some(given) = r.float(key, None)? {
                    if given != v {
                        return Err(CliError::Config(format!(
                            "`{key}` = {given} conflicts with preset `{name}` ({key} = {v})"
                        )));
                    }
                }
            }
            if let Some(k) = r.int("k", None)? {
                if k != p.k() as i64 {
                    return Err(CliError::Config(format!("`k` = {k} conflicts with preset `{name}` (k = {})", p.k())));
                }
            }
            p
        }
    };
    Ok((name, params))
}

/// Resolve one point of a config into a [`RunSpec`].
pub fn resolve(table: &Table) -> Result<RunSpec, CliError> {
    let mut r = Reader { table, resolved: Table::new() };
    let (preset, params) = resolve_params(&mut r)?;
    for (key, v) in [("k", Value::Integer(params.k() as i64)), ("a", Value::Float(params.a())), ("b", Value::Float(params.b())), ("c", Value::Float(params.c()))] {
        r.resolved.insert(key.into(), v);
    }

    let domain = match r.string("domain", Some("line"))?.as_deref() {
        Some("line") => DomainKind::Line,
        Some("circle") => DomainKind::Circle,
        Some(other) => return Err(CliError::Config(format!("`domain` must be line or circle, got \"{other}\""))),
        None => unreachable!(),
    };
    let n = r.count("n", 512)?;
    let default_length = match domain {
        DomainKind::Line => LINE_LENGTH,
        DomainKind::Circle => 2.0 * PI,
    };
    let length = r.req_float("length", default_length)?;
    let grid = Grid::new(n, length)?;

    let profile = match r.string("profile", Some("peakon"))?.as_deref() {
        Some("peakon") => Profile::Peakon { gamma: r.req_float("gamma", 1.0)? },
        Some("exp_tail") => Profile::ExpTail { theta: r.req_float("theta", 0.5)? },
        Some("bump") => Profile::Bump { width: r.req_float("width", 2.0)? },
        Some("wave") => Profile::Wave { offset: r.req_float("offset", 1.0)?, amplitude: r.req_float("amplitude", 0.2)? },
        Some("zero") => Profile::Zero,
        Some("file") => Profile::File(PathBuf::from(
            r.string("profile_file", None)?.ok_or_else(|| CliError::Config("profile `file` needs `profile_file`".into()))?,
        )),
        Some(other) => {
            return Err(CliError::Config(format!(
                "`profile` must be one of peakon, exp_tail, bump, wave, zero, file; got \"{other}\""
            )))
        }
        None => unreachable!(),
    };
    let moll_width = r.req_float("moll_width", default_moll_width(&grid))?;

    let t_end = r.req_float("t_end", 1.0)?;
    let cfl_safety = r.req_float("cfl_safety", 0.4)?;
    let dt_max = r.req_float("dt_max", 1e-2)?;
    let output_stride = r.count("output_stride", 1)?;
    let sobolev_order = r.req_float("sobolev_order", DEFAULT_SOBOLEV_ORDER)?;
    let filter = r.boolean("filter", false)?;
    let write_snapshots = r.boolean("write_snapshots", true)?;

    let decay_theta = r.req_float("decay_theta", 0.5)?;
    let window = match (r.float("window_lo", None)?, r.float("window_hi", None)?) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(CliError::Config("set both `window_lo` and `window_hi` or neither".into())),
    };
    let side = match r.string("side", Some("right"))?.as_deref() {
        Some("right") => Side::Right,
        Some("left") => Side::Left,
        Some(other) => return Err(CliError::Config(format!("`side` must be left or right, got \"{other}\""))),
        None => unreachable!(),
    };
    let seeds = match r.float_list("seeds")? {
        Some(s) if s.is_empty() => return Err(CliError::Config("`seeds` is empty".into())),
        Some(s) => s,
        None => {
            // 16 particles spread over the middle half of the box
            let (lo, span) = (0.25 * length, 0.5 * length);
            let s: Vec<f64> = (0..16).map(|i| lo + span * (i as f64 + 0.5) / 16.0).collect();
            r.resolved.insert("seeds".into(), Value::Array(s.iter().map(|&f| Value::Float(f)).collect()));
            s
        }
    };
    let mms_levels = r.count("mms_levels", 4)?;
    let mms_amplitude = r.req_float("mms_amplitude", 0.1)?;
    let mms_wavenumber = r.req_float("mms_wavenumber", 1.0)?;
    let mms_speed = r.req_float("mms_speed", 1.0)?;

    let spec = RunSpec {
        preset,
        params,
        domain,
        grid,
        profile,
        moll_width,
        t_end,
        cfl_safety,
        dt_max,
        output_stride,
        sobolev_order,
        filter,
        write_snapshots,
        decay_theta,
        window,
        side,
        seeds,
        mms_levels,
        mms_amplitude,
        mms_wavenumber,
        mms_speed,
        resolved: r.resolved,
    };
    spec.sim_config().validate()?;
    if mms_levels < 2 {
        return Err(CliError::Config(format!("`mms_levels` must be at least 2, got {mms_levels}")));
    }
    if let Some((lo, hi)) = window {
        if !(lo >= 0.0 && hi > lo) {
            return Err(CliError::Config(format!("decay window [{lo}, {hi}] is empty or negative")));
        }
    }
    Ok(spec)
}
