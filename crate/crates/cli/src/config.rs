//! Flat `key = value` configuration with fixed units per key.

use std::collections::HashMap;
use std::fmt;

use leo_irs::beamforming::Scheme;
use leo_irs::experiments::{SweepSpec, SweepVariable};
use leo_irs::geometry::{ArraySizes, Orientation};
use leo_irs::tracking::{IncrementMode, ProtocolConfig};
use leo_irs::{ScenarioConfig, ShortRangeModel, TrainingConfig};
use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Everything a run can be configured with, before the subcommand picks
/// what it needs. Optional fields fall back to values derived from the
/// scenario or the subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Ground node, ground IRS offsets from the sub-satellite surface point.
    pub gn_offset_m: Vector3<f64>,
    pub irs1_offset_m: Vector3<f64>,
    pub out: Option<String>,

    pub sweep_variable: Option<SweepVariable>,
    pub sweep_values: Option<Vec<f64>>,
    pub sweep_schemes: Option<Vec<Scheme>>,
    pub sweep_trials: usize,
    pub snapshot_time_s: f64,

    pub frame_duration_s: f64,
    pub start_time_s: f64,
    pub total_time_s: f64,
    pub sample_interval_s: f64,
    pub increment_mode: IncrementMode,
    pub phase_tracking: bool,
    pub tracking_schemes: Vec<Scheme>,

    pub pilots_down: Option<usize>,
    pub pilots_up: Option<usize>,
    pub training_noise_var: Option<f64>,
    pub grid_theta: usize,
    pub grid_phi: usize,
    pub refine_iters: usize,
    pub in_plane_search: Option<bool>,

    /// Line each key was last set on.
    lines: HashMap<String, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = ScenarioConfig::default();
        let earth = Vector3::new(0.0, 0.0, scenario.earth_radius_m);
        Self {
            gn_offset_m: scenario.gn_position_m - earth,
            irs1_offset_m: scenario.irs1_position_m - earth,
            scenario,
            out: None,
            sweep_variable: None,
            sweep_values: None,
            sweep_schemes: None,
            sweep_trials: 100,
            snapshot_time_s: 10.0,
            frame_duration_s: 10.0,
            start_time_s: 0.0,
            total_time_s: 40.0,
            sample_interval_s: 0.5,
            increment_mode: IncrementMode::FiniteDifference,
            phase_tracking: false,
            tracking_schemes: vec![Scheme::TwoSided],
            pilots_down: None,
            pilots_up: None,
            training_noise_var: None,
            grid_theta: 256,
            grid_phi: 64,
            refine_iters: 4,
            in_plane_search: None,
            lines: HashMap::new(),
        }
    }
}

type Setter = fn(&mut RunConfig, &str) -> Result<(), String>;

/// One documented key: name, unit, default as text, description, setter.
pub struct KeySpec {
    pub key: &'static str,
    pub unit: &'static str,
    pub default: &'static str,
    pub help: &'static str,
    set: Setter,
}

fn num(v: &str) -> Result<f64, String> {
    match v {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => v.parse::<f64>().map_err(|_| format!("'{v}' is not a number")),
    }
}

fn finite(v: &str) -> Result<f64, String> {
    let x = num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' must be finite"))
    }
}

fn positive(v: &str) -> Result<f64, String> {
    let x = finite(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn count(v: &str) -> Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("'{v}' is not a nonnegative integer"))
}

fn positive_count(v: &str) -> Result<usize, String> {
    match count(v)? {
        0 => Err("must be at least 1".into()),
        n => Ok(n),
    }
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{v}' is not a boolean")),
    }
}

fn triple(v: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got '{v}'"));
    }
    Ok(Vector3::new(finite(parts[0])?, finite(parts[1])?, finite(parts[2])?))
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("list must not be empty".into());
    }
    Ok(items)
}

fn scheme(v: &str) -> Result<Scheme, String> {
    Scheme::parse(v).map_err(|e| e.to_string())
}

macro_rules! key {
    ($key:expr, $unit:expr, $default:expr, $help:expr, |$c:ident, $v:ident| $body:expr) => {
        KeySpec {
            key: $key,
            unit: $unit,
            default: $default,
            help: $help,
            set: |$c: &mut RunConfig, $v: &str| -> Result<(), String> {
                $body;
                Ok(())
            },
        }
    };
}

pub static KEYS: &[KeySpec] = &[
    key!("run.seed", "-", "0", "master seed for every random stream", |c, v| c.scenario.rng_seed =
        v.parse().map_err(|_| format!("'{v}' is not a 64-bit unsigned integer"))?),
    key!("run.out", "path", "stdout", "CSV output path", |c, v| c.out = Some(v.to_string())),
    key!("orbit.earth_radius_m", "m", "6.37e6", "Earth radius", |c, v| c.scenario.earth_radius_m = positive(v)?),
    key!("orbit.altitude_m", "m", "6e5", "orbit altitude above the surface", |c, v| c.scenario.orbit_altitude_m =
        positive(v)?),
    key!("orbit.speed_mps", "m/s", "7.5665e3", "satellite speed", |c, v| c.scenario.orbit_speed_mps = positive(v)?),
    key!(
        "nodes.gn_offset_m",
        "m",
        "0,0,100",
        "ground node position relative to the surface point below t=0",
        |c, v| c.gn_offset_m = triple(v)?
    ),
    key!("nodes.irs1_offset_m", "m", "5,0,95", "ground IRS position relative to the surface point", |c, v| c
        .irs1_offset_m =
        triple(v)?),
    key!("nodes.irs2_offset_m", "m", "3,0,3", "satellite IRS offset from the satellite at t=0", |c, v| c
        .scenario
        .sat_offset_m =
        triple(v)?),
    key!("carrier.wavelength_m", "m", "2", "carrier wavelength", |c, v| c.scenario.wavelength_m = positive(v)?),
    key!("link.ref_path_gain_db", "dB", "-30", "path gain at 1 m", |c, v| c.scenario.ref_path_gain_db = finite(v)?),
    key!("link.noise_power_dbm", "dBm", "-90", "receiver noise power", |c, v| c.scenario.noise_power_dbm = finite(v)?),
    key!("link.tx_power_dbm", "dBm", "30", "transmit power", |c, v| c.scenario.tx_power_dbm = finite(v)?),
    key!("link.rician_factor_db", "dB", "10", "Rician factor of the far-field links (inf = pure LoS)", |c, v| {
        let k = num(v)?;
        if k.is_nan() || k == f64::NEG_INFINITY {
            return Err(format!("'{v}' is not a valid Rician factor"));
        }
        c.scenario.rician_factor_db = k
    }),
    key!("arrays.n1_x", "-", "5", "ground antenna columns", |c, v| c.scenario.arrays.n1.0 = positive_count(v)?),
    key!("arrays.n1_y", "-", "5", "ground antenna rows", |c, v| c.scenario.arrays.n1.1 = positive_count(v)?),
    key!("arrays.n2_x", "-", "5", "satellite antenna columns", |c, v| c.scenario.arrays.n2.0 = positive_count(v)?),
    key!("arrays.n2_y", "-", "5", "satellite antenna rows", |c, v| c.scenario.arrays.n2.1 = positive_count(v)?),
    key!("arrays.m1", "-", "500", "ground IRS elements (0 = absent)", |c, v| c.scenario.arrays.m1 = count(v)?),
    key!("arrays.m2", "-", "500", "satellite IRS elements (0 = absent)", |c, v| c.scenario.arrays.m2 = count(v)?),
    key!("arrays.spacing_m", "m", "0.25", "element spacing", |c, v| c.scenario.arrays.spacing_m = positive(v)?),
    key!("arrays.orientation", "-", "in_plane", "in_plane or horizon", |c, v| c.scenario.orientation = match v {
        "in_plane" => Orientation::InPlane,
        "horizon" => Orientation::Horizon,
        _ => return Err(format!("'{v}' is not in_plane or horizon")),
    }),
    key!("channel.short_range", "-", "rank_one", "node-IRS link model: rank_one or near_field", |c, v| c
        .scenario
        .short_range =
        match v {
            "rank_one" => ShortRangeModel::RankOne,
            "near_field" => ShortRangeModel::NearField,
            _ => return Err(format!("'{v}' is not rank_one or near_field")),
        }),
    key!(
        "channel.fold_split_residual",
        "-",
        "false",
        "force the IRS-IRS gain to the product of the split gains",
        |c, v| c.scenario.fold_split_residual = flag(v)?
    ),
    key!(
        "sweep.variable",
        "-",
        "per subcommand",
        "tx_power, total_elements, time, quantization_levels, rician_factor",
        |c, v| c.sweep_variable = Some(SweepVariable::parse(v).map_err(|e| e.to_string())?)
    ),
    key!("sweep.values", "per variable", "per variable", "comma-separated sweep values", |c, v| c.sweep_values =
        Some(list(v, num)?)),
    key!("sweep.schemes", "-", "six main schemes", "comma-separated scheme names", |c, v| c.sweep_schemes =
        Some(list(v, scheme)?)),
    key!("sweep.trials", "-", "100", "Monte Carlo trials per point", |c, v| c.sweep_trials = positive_count(v)?),
    key!("sweep.snapshot_time_s", "s", "10", "time instant of sweep snapshots", |c, v| c.snapshot_time_s = finite(v)?),
    key!("tracking.frame_duration_s", "s", "10", "data frame length between training periods", |c, v| c
        .frame_duration_s =
        positive(v)?),
    key!("tracking.start_time_s", "s", "0", "first training instant", |c, v| c.start_time_s = finite(v)?),
    key!("tracking.total_time_s", "s", "40", "length of the simulated interval", |c, v| c.total_time_s = positive(v)?),
    key!("tracking.sample_interval_s", "s", "0.5", "spacing of gain samples", |c, v| c.sample_interval_s =
        positive(v)?),
    key!("tracking.increment_mode", "-", "finite_difference", "finite_difference or closed_form", |c, v| c
        .increment_mode =
        match v {
            "finite_difference" => IncrementMode::FiniteDifference,
            "closed_form" => IncrementMode::ClosedForm,
            _ => return Err(format!("'{v}' is not finite_difference or closed_form")),
        }),
    key!("tracking.phase_tracking", "-", "false", "extrapolate the phase difference within a frame", |c, v| c
        .phase_tracking =
        flag(v)?),
    key!("tracking.schemes", "-", "two_sided", "schemes run through the protocol", |c, v| c.tracking_schemes =
        list(v, scheme)?),
    key!("training.pilots_down", "-", "M1+2", "downlink pilot count", |c, v| c.pilots_down = Some(positive_count(v)?)),
    key!("training.pilots_up", "-", "M2+2", "uplink pilot count", |c, v| c.pilots_up = Some(positive_count(v)?)),
    key!("training.noise_var", "-", "noise/tx power", "normalized training noise variance", |c, v| {
        let x = finite(v)?;
        if x < 0.0 {
            return Err(format!("must be >= 0, got {v}"));
        }
        c.training_noise_var = Some(x)
    }),
    key!("training.grid_theta", "-", "256", "azimuth grid points", |c, v| c.grid_theta = positive_count(v)?),
    key!("training.grid_phi", "-", "64", "elevation grid points", |c, v| c.grid_phi = positive_count(v)?),
    key!("training.refine_iters", "-", "4", "alternating refinement rounds", |c, v| c.refine_iters = count(v)?),
    key!("training.in_plane", "-", "true for in_plane", "search azimuth only", |c, v| c.in_plane_search =
        Some(flag(v)?)),
];

/// Listing of every key with its unit, default and meaning.
pub fn help_config() -> String {
    let width = KEYS.iter().map(|k| k.key.len()).max().unwrap_or(0);
    let mut out = String::from("# key = value, one per line; '#' starts a comment\n");
    for k in KEYS {
        out.push_str(&format!("{:width$}  [{}] default {}: {}\n", k.key, k.unit, k.default, k.help, width = width));
    }
    out
}

impl RunConfig {
    /// Apply one assignment; `line` is recorded for later error messages.
    pub fn set(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError { key: key.to_string(), line, message };
        let spec = KEYS.iter().find(|k| k.key == key).ok_or_else(|| err("unknown key".into()))?;
        (spec.set)(self, value).map_err(err)?;
        match line {
            Some(l) => self.lines.insert(key.to_string(), l),
            None => self.lines.remove(key),
        };
        Ok(())
    }

    /// Apply a `key=value` override as given on the command line.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError {
            key: assignment.to_string(),
            line: None,
            message: "expected key=value".into(),
        })?;
        self.set(k.trim(), v.trim(), None)
    }

    fn error_at(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { key: key.to_string(), line: self.lines.get(key).copied(), message: message.into() }
    }

    /// The scenario with node positions composed from the offsets.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut s = self.scenario.clone();
        let surface = Vector3::new(0.0, 0.0, s.earth_radius_m);
        s.gn_position_m = surface + self.gn_offset_m;
        s.irs1_position_m = surface + self.irs1_offset_m;
        s.validate().map_err(|e| {
            let key = scenario_key(&e.to_string());
            self.error_at(key, e.to_string())
        })?;
        Ok(s)
    }

    pub fn training(&self, s: &ScenarioConfig) -> Result<TrainingConfig, ConfigError> {
        let a: &ArraySizes = &s.arrays;
        let mut tc = TrainingConfig::new(a.m1, a.m2, self.training_noise_var.unwrap_or_else(|| s.noise_var()));
        tc.i_d = self.pilots_down.unwrap_or(tc.i_d);
        tc.i_u = self.pilots_up.unwrap_or(tc.i_u);
        tc.grid_theta = self.grid_theta;
        tc.grid_phi = self.grid_phi;
        tc.refine_iters = self.refine_iters;
        tc.in_plane = self.in_plane_search.unwrap_or(s.orientation == Orientation::InPlane);
        let n1 = a.n1.0 * a.n1.1;
        let n2 = a.n2.0 * a.n2.1;
        tc.validate(n1, a.m1, n2, a.m2).map_err(|e| {
            let key = if e.to_string().contains("downlink") { "training.pilots_down" } else { "training.pilots_up" };
            self.error_at(key, e.to_string())
        })?;
        Ok(tc)
    }

    pub fn protocol(&self, s: &ScenarioConfig) -> Result<ProtocolConfig, ConfigError> {
        let mut pc = ProtocolConfig::new(self.training(s)?);
        pc.frame_duration_s = self.frame_duration_s;
        pc.start_time_s = self.start_time_s;
        pc.total_time_s = self.total_time_s;
        pc.sample_interval_s = self.sample_interval_s;
        pc.increment_mode = self.increment_mode;
        pc.phase_tracking = self.phase_tracking;
        pc.validate().map_err(|e| self.error_at("tracking.sample_interval_s", e.to_string()))?;
        Ok(pc)
    }

    /// Sweep for `variable` unless the config names another one.
    pub fn sweep(&self, default_variable: SweepVariable) -> Result<SweepSpec, ConfigError> {
        let variable = self.sweep_variable.unwrap_or(default_variable);
        let values = self.sweep_values.clone().unwrap_or_else(|| default_values(variable));
        let schemes = self.sweep_schemes.clone().unwrap_or_else(|| MAIN_SCHEMES.to_vec());
        let spec = SweepSpec {
            variable,
            values,
            schemes,
            monte_carlo_trials: self.sweep_trials,
            snapshot_time_s: self.snapshot_time_s,
        };
        spec.validate().map_err(|e| self.error_at("sweep.values", e.to_string()))?;
        Ok(spec)
    }
}

pub const MAIN_SCHEMES: [Scheme; 6] = [
    Scheme::TwoSided,
    Scheme::SatIrsOnly,
    Scheme::GnIrsOnly,
    Scheme::SatReflectarrayOnly,
    Scheme::SatReflectarrayGnIrs,
    Scheme::NoIrs,
];

fn default_values(variable: SweepVariable) -> Vec<f64> {
    match variable {
        SweepVariable::TxPower => (0..=8).map(|k| 5.0 * k as f64).collect(),
        SweepVariable::TotalElements => (1..=6).map(|k| 500.0 * k as f64).collect(),
        SweepVariable::Time => (0..=8).map(|k| 5.0 * k as f64).collect(),
        SweepVariable::QuantizationLevels => vec![0.0, 2.0, 4.0, 8.0, 16.0],
        SweepVariable::RicianFactor => vec![-10.0, 0.0, 10.0, 20.0, f64::INFINITY],
    }
}

/// Best-effort mapping from a scenario validation message to its key.
fn scenario_key(message: &str) -> &'static str {
    let table = [
        ("orbit speed", "orbit.speed_mps"),
        ("orbit radius", "orbit.altitude_m"),
        ("earth radius", "orbit.earth_radius_m"),
        ("wavelength", "carrier.wavelength_m"),
        ("spacing", "arrays.spacing_m"),
        ("rician", "link.rician_factor_db"),
        ("positions", "nodes.gn_offset_m"),
        ("active arrays", "arrays.n1_x"),
    ];
    table.iter().find(|(needle, _)| message.contains(needle)).map(|(_, k)| *k).unwrap_or("scenario")
}

/// Parse configuration text. Blank lines and `#` comments are ignored; a
/// key may appear more than once, the last assignment wins.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| ConfigError {
            key: body.to_string(),
            line: Some(line),
            message: "expected 'key = value'".into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if v.is_empty() {
            return Err(ConfigError { key: k.to_string(), line: Some(line), message: "missing value".into() });
        }
        cfg.set(k, v, Some(line))?;
    }
    Ok(cfg)
}
