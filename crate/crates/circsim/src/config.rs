//! Run configuration: a TOML document of flat keys, optionally grouped in
//! sections, overlaid with `--set key=value` overrides.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use circsim_core::analysis::{Direction, OptimizerConfig, MAX_SPREAD};
use circsim_core::device::{
    BiasPoint, CouplingCapacitance, DeviceParams, GammaConvention, QuasiparticleSector,
};
use circsim_core::dynamics::Method;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;

/// Every accepted key and the section it may also appear under.
pub const KEYS: &[(&str, &str)] = &[
    ("e_c_sigma_ghz", "device"),
    ("e_j_ghz", "device"),
    ("c_x_ff", "device"),
    ("gamma_ghz", "device"),
    ("gamma_convention", "device"),
    ("z_wg_ohm", "device"),
    ("c_c_tilde_ff", "device"),
    ("n_cut", "device"),
    ("n_levels", "device"),
    ("phi_x", "bias"),
    ("n_g", "bias"),
    ("sector", "bias"),
    ("direction", "bias"),
    ("f_min_ghz", "grid"),
    ("f_max_ghz", "grid"),
    ("f_step_mhz", "grid"),
    ("f_drive_ghz", "grid"),
    ("method", "grid"),
    ("phi_min", "grid"),
    ("phi_max", "grid"),
    ("phi_points", "grid"),
    ("spectrum_sectors", "grid"),
    ("power_dbm", "grid"),
    ("power_metric", "grid"),
    ("delta_grid", "grid"),
    ("c_x_list", "grid"),
    ("opt_starts", "optimizer"),
    ("opt_screening", "optimizer"),
    ("opt_max_evals", "optimizer"),
    ("opt_verify_full", "optimizer"),
    ("seed", "optimizer"),
    ("out_dir", "output"),
];

const REQUIRED: &[&str] = &["e_c_sigma_ghz", "e_j_ghz", "c_x_ff", "gamma_ghz"];

/// Configuration key for a core field name, with its physical symbol.
fn config_key(core_field: &str) -> &'static str {
    match core_field {
        "e_c_sigma" => "e_c_sigma_ghz (E_CΣ)",
        "e_j" => "e_j_ghz (E_J)",
        "c_x" => "c_x_ff (C_X)",
        "c_c_tilde" => "c_c_tilde_ff (C̃_C)",
        "z_wg" => "z_wg_ohm (Z_wg)",
        "gamma" => "gamma_ghz (Gamma)",
        "n_cut" => "n_cut",
        "n_levels" => "n_levels",
        "phi_x" => "phi_x",
        "opt_starts" => "opt_starts",
        "opt_max_evals" => "opt_max_evals",
        "f_step_mhz" => "f_step_mhz",
        "f_max_ghz" => "f_max_ghz",
        "delta" => "delta_grid",
        "power_dbm" => "power_dbm",
        _ => "parameter",
    }
}

/// Rewrites a core validation error in terms of configuration keys.
pub fn describe_invalid(err: &circsim_core::Error) -> String {
    match err {
        circsim_core::Error::InvalidParameter {
            field,
            value,
            bound,
        } => format!("invalid {} = {value}: must be {bound}", config_key(field)),
        other => other.to_string(),
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub e_c_sigma_ghz: f64,
    pub e_j_ghz: [f64; 3],
    /// Echo of the relative junction spread.
    pub delta_e_j: f64,
    pub c_x_ff: f64,
    pub gamma_ghz: f64,
    pub gamma_convention: String,
    pub z_wg_ohm: f64,
    /// Absent means the closed-form `C̃_C → ∞` network.
    pub c_c_tilde_ff: Option<f64>,
    pub n_cut: usize,
    pub n_levels: usize,
    /// Absent means commands that need a bias optimise one first.
    pub phi_x: Option<f64>,
    pub n_g: [f64; 3],
    pub sector: u8,
    pub direction: String,
    pub f_min_ghz: f64,
    pub f_max_ghz: f64,
    pub f_step_mhz: f64,
    pub f_drive_ghz: Option<f64>,
    pub method: String,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_points: usize,
    pub spectrum_sectors: Vec<u8>,
    pub power_dbm: Vec<f64>,
    pub power_metric: String,
    pub delta_grid: Vec<f64>,
    pub c_x_list: Vec<f64>,
    pub opt_starts: usize,
    pub opt_screening: usize,
    pub opt_max_evals: usize,
    pub opt_verify_full: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn default_power_grid() -> Vec<f64> {
    (0..=16).map(|k| -150.0 + 2.5 * k as f64).collect()
}

impl RunConfig {
    pub fn device(&self) -> DeviceParams {
        let mut p = DeviceParams::new(self.e_c_sigma_ghz, self.e_j_ghz, self.c_x_ff, self.gamma_ghz);
        p.z_wg = self.z_wg_ohm;
        p.n_cut = self.n_cut;
        p.n_levels = self.n_levels;
        p.c_c_tilde = match self.c_c_tilde_ff {
            Some(cc) => CouplingCapacitance::Finite(cc),
            None => CouplingCapacitance::Infinite,
        };
        p.gamma_convention = if self.gamma_convention == "angular" {
            GammaConvention::Angular
        } else {
            GammaConvention::Ordinary
        };
        p
    }

    pub fn bias(&self) -> Option<BiasPoint> {
        self.phi_x.map(|phi| BiasPoint::new(phi, self.n_g))
    }

    pub fn sector(&self) -> QuasiparticleSector {
        QuasiparticleSector::ALL[self.sector as usize]
    }

    pub fn direction(&self) -> Direction {
        self.direction.parse().unwrap_or(Direction::Cw)
    }

    pub fn power_metric(&self) -> Direction {
        self.power_metric.parse().unwrap_or(Direction::Ccw)
    }

    pub fn method(&self) -> Method {
        if self.method == "adiabatic" {
            Method::Adiabatic
        } else {
            Method::Full
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            starts: self.opt_starts,
            screening_per_start: self.opt_screening,
            max_evals_per_start: self.opt_max_evals,
            seed: self.seed,
            verify_full: self.opt_verify_full,
            ..OptimizerConfig::default()
        }
    }

    pub fn flux_grid(&self) -> Vec<f64> {
        circsim_core::analysis::linspace(self.phi_min, self.phi_max, self.phi_points)
    }

    /// Canonical JSON used for hashing and echoing.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }
}

/// Parses `key=value` with the value read as a TOML value; bare words that
/// are not valid TOML are taken as strings.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{s}` is not of the form key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key, value))
}

fn valid_keys() -> String {
    let mut out = String::new();
    for (i, (k, _)) in KEYS.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(k);
    }
    out
}

fn unknown(key: &str) -> CliError {
    CliError::Config(format!("unknown key `{key}`; valid keys are: {}", valid_keys()))
}

fn section_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

/// Merges sections into one flat table, rejecting unknown keys.
fn flatten(doc: Table) -> Result<Table, CliError> {
    let mut flat = Table::new();
    for (key, value) in doc {
        if section_of(&key).is_some() {
            flat.insert(key, value);
            continue;
        }
        let is_section = KEYS.iter().any(|(_, s)| *s == key);
        match value {
            Value::Table(inner) if is_section => {
                for (k, v) in inner {
                    if section_of(&k) != Some(key.as_str()) {
                        return Err(unknown(&format!("{key}.{k}")));
                    }
                    if flat.insert(k.clone(), v).is_some() {
                        return Err(CliError::Config(format!("key `{k}` given twice")));
                    }
                }
            }
            _ => return Err(unknown(&key)),
        }
    }
    Ok(flat)
}

/// Applies overrides; `section.key` and bare `key` are both accepted.
fn apply_overrides(flat: &mut Table, overrides: &[(String, Value)]) -> Result<(), CliError> {
    for (key, value) in overrides {
        let bare = match key.split_once('.') {
            Some((section, k)) if section_of(k) == Some(section) => k,
            Some(_) => return Err(unknown(key)),
            None => key.as_str(),
        };
        if section_of(bare).is_none() {
            return Err(unknown(key));
        }
        flat.insert(bare.to_string(), value.clone());
    }
    Ok(())
}

struct Reader {
    flat: Table,
}

impl Reader {
    fn type_error(key: &str, want: &str, got: &Value) -> CliError {
        CliError::Config(format!("key `{key}` must be {want}, got `{got}`"))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.flat.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(Self::type_error(key, "a number", v)),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn uint_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.flat.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(v) => Err(Self::type_error(key, "a non-negative integer", v)),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.flat.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(Self::type_error(key, "true or false", v)),
        }
    }

    fn str_or(&self, key: &str, default: &str, allowed: &[&str]) -> Result<String, CliError> {
        match self.flat.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) if allowed.contains(&s.as_str()) => Ok(s.clone()),
            Some(v) => Err(Self::type_error(key, &format!("one of {allowed:?}"), v)),
        }
    }

    fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.flat.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(Self::type_error(key, "an array of numbers", other)),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(Self::type_error(key, "an array of numbers", v)),
        }
    }

    fn triple_opt(&self, key: &str) -> Result<Option<[f64; 3]>, CliError> {
        match self.list_opt(key)? {
            None => Ok(None),
            Some(v) => <[f64; 3]>::try_from(v.as_slice()).map(Some).map_err(|_| {
                CliError::Config(format!("key `{key}` must hold exactly three numbers, got {}", v.len()))
            }),
        }
    }
}

fn bound_error(key: &str, value: impl std::fmt::Display, bound: &str) -> CliError {
    CliError::Config(format!("invalid {key} = {value}: must be {bound}"))
}

/// Builds and validates a configuration from a parsed document.
/// With `fitted_defaults` the fitted device fills any missing required key.
pub fn resolve(doc: Table, overrides: &[(String, Value)], fitted_defaults: bool) -> Result<RunConfig, CliError> {
    let mut flat = flatten(doc)?;
    apply_overrides(&mut flat, overrides)?;
    if fitted_defaults {
        let fitted: Table = fitted_device_toml().parse().expect("fitted device document");
        for (k, v) in fitted {
            flat.entry(k).or_insert(v);
        }
    }
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !flat.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!("missing required keys: {}", missing.join(", "))));
    }
    let r = Reader { flat };

    let sector = r.uint_or("sector", 0)?;
    if sector > 3 {
        return Err(bound_error("sector", sector, "0, 1, 2 or 3"));
    }
    let spectrum_sectors = match r.list_opt("spectrum_sectors")? {
        None => vec![0, 1, 2, 3],
        Some(v) => v
            .into_iter()
            .map(|s| {
                if (0.0..=3.0).contains(&s) && s.fract() == 0.0 {
                    Ok(s as u8)
                } else {
                    Err(bound_error("spectrum_sectors", s, "0, 1, 2 or 3"))
                }
            })
            .collect::<Result<_, _>>()?,
    };

    let cfg = RunConfig {
        e_c_sigma_ghz: r.f64_or("e_c_sigma_ghz", f64::NAN)?,
        e_j_ghz: r.triple_opt("e_j_ghz")?.unwrap_or([f64::NAN; 3]),
        delta_e_j: 0.0,
        c_x_ff: r.f64_or("c_x_ff", f64::NAN)?,
        gamma_ghz: r.f64_or("gamma_ghz", f64::NAN)?,
        gamma_convention: r.str_or("gamma_convention", "ordinary", &["ordinary", "angular"])?,
        z_wg_ohm: r.f64_or("z_wg_ohm", DeviceParams::DEFAULT_Z_WG)?,
        c_c_tilde_ff: r.f64_opt("c_c_tilde_ff")?,
        n_cut: r.uint_or("n_cut", DeviceParams::DEFAULT_N_CUT as u64)? as usize,
        n_levels: r.uint_or("n_levels", DeviceParams::DEFAULT_N_LEVELS as u64)? as usize,
        phi_x: r.f64_opt("phi_x")?,
        n_g: r.triple_opt("n_g")?.unwrap_or([0.0; 3]),
        sector: sector as u8,
        direction: r.str_or("direction", "cw", &["cw", "ccw"])?,
        f_min_ghz: r.f64_or("f_min_ghz", 7.0)?,
        f_max_ghz: r.f64_or("f_max_ghz", 7.5)?,
        f_step_mhz: r.f64_or("f_step_mhz", 2.0)?,
        f_drive_ghz: r.f64_opt("f_drive_ghz")?,
        method: r.str_or("method", "full", &["full", "adiabatic"])?,
        phi_min: r.f64_or("phi_min", 0.0)?,
        phi_max: r.f64_or("phi_max", 2.0 * PI)?,
        phi_points: r.uint_or("phi_points", 201)? as usize,
        spectrum_sectors,
        power_dbm: r.list_opt("power_dbm")?.unwrap_or_else(default_power_grid),
        power_metric: r.str_or("power_metric", "ccw", &["cw", "ccw"])?,
        delta_grid: r.list_opt("delta_grid")?.unwrap_or_else(|| vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05]),
        c_x_list: r.list_opt("c_x_list")?.unwrap_or_else(|| vec![0.0, 75.0, 150.0]),
        opt_starts: r.uint_or("opt_starts", 8)? as usize,
        opt_screening: r.uint_or("opt_screening", 16)? as usize,
        opt_max_evals: r.uint_or("opt_max_evals", 600)? as usize,
        opt_verify_full: r.bool_or("opt_verify_full", true)?,
        seed: r.uint_or("seed", 0)?,
        out_dir: match r.flat.get("out_dir") {
            None => PathBuf::from("out"),
            Some(Value::String(s)) => PathBuf::from(s),
            Some(v) => return Err(Reader::type_error("out_dir", "a path string", v)),
        },
    };
    validate(cfg)
}

fn validate(mut cfg: RunConfig) -> Result<RunConfig, CliError> {
    cfg.device().validate().map_err(|e| CliError::Config(describe_invalid(&e)))?;
    cfg.delta_e_j = cfg.device().junction_spread();
    if let Some(phi) = cfg.phi_x {
        if !phi.is_finite() {
            return Err(bound_error("phi_x", phi, "finite"));
        }
    }
    if cfg.n_g.iter().any(|g| !g.is_finite()) {
        return Err(bound_error("n_g", format!("{:?}", cfg.n_g), "finite"));
    }
    if !(cfg.f_min_ghz > 0.0 && cfg.f_max_ghz >= cfg.f_min_ghz && cfg.f_max_ghz.is_finite()) {
        return Err(bound_error("f_max_ghz", cfg.f_max_ghz, ">= f_min_ghz > 0"));
    }
    if !(cfg.f_step_mhz > 0.0 && cfg.f_step_mhz.is_finite()) {
        return Err(bound_error("f_step_mhz", cfg.f_step_mhz, "finite and > 0"));
    }
    if let Some(f) = cfg.f_drive_ghz {
        if !(f > 0.0 && f.is_finite()) {
            return Err(bound_error("f_drive_ghz", f, "finite and > 0"));
        }
    }
    if !(cfg.phi_min.is_finite() && cfg.phi_max.is_finite() && cfg.phi_max >= cfg.phi_min) {
        return Err(bound_error("phi_max", cfg.phi_max, "finite and >= phi_min"));
    }
    if cfg.phi_points == 0 {
        return Err(bound_error("phi_points", 0, ">= 1"));
    }
    if cfg.power_dbm.is_empty() || cfg.power_dbm.iter().any(|p| !p.is_finite()) {
        return Err(bound_error("power_dbm", format!("{:?}", cfg.power_dbm), "a non-empty list of finite values"));
    }
    if let Some(d) = cfg.delta_grid.iter().find(|d| !(0.0..=MAX_SPREAD).contains(*d)) {
        return Err(bound_error("delta_grid", d, "within [0, 0.05]"));
    }
    if let Some(cx) = cfg.c_x_list.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(bound_error("c_x_list (C_X)", cx, "finite and >= 0"));
    }
    if cfg.opt_starts == 0 {
        return Err(bound_error("opt_starts", 0, ">= 1"));
    }
    if cfg.opt_max_evals < 5 {
        return Err(bound_error("opt_max_evals", cfg.opt_max_evals, ">= 5"));
    }
    Ok(cfg)
}

pub fn parse_str(text: &str, overrides: &[(String, Value)], fitted_defaults: bool) -> Result<RunConfig, CliError> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("config is not valid TOML: {e}")))?;
    resolve(doc, overrides, fitted_defaults)
}

/// Reads, overlays and validates the configuration. With no file the
/// document starts empty, so the required keys must come from overrides or
/// the fitted defaults.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, Value)],
    fitted_defaults: bool,
) -> Result<RunConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_str(&text, overrides, fitted_defaults)
}

/// The fitted device as a configuration document.
pub fn fitted_device_toml() -> String {
    let p = DeviceParams::fitted();
    let mut s = String::new();
    let _ = writeln!(s, "e_c_sigma_ghz = {:?}", p.e_c_sigma);
    let _ = writeln!(s, "e_j_ghz = [{:?}, {:?}, {:?}]", p.e_j[0], p.e_j[1], p.e_j[2]);
    let _ = writeln!(s, "c_x_ff = {:?}", p.c_x);
    let _ = writeln!(s, "gamma_ghz = {:?}", p.gamma);
    s
}
