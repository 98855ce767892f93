//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use gait_lab::crawl::QuadParams;
use gait_lab::integrator::DEFAULT_STEP;
use gait_lab::slip::SlipParams;
use gait_lab::walk::WalkerParams;

use crate::CliError;

/// Step used for the crawler's quasi-static update.
pub const CRAWLER_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Slip,
    Walker,
    Crawler,
    Periodic,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Slip => "slip",
            Model::Walker => "walker",
            Model::Crawler => "crawler",
            Model::Periodic => "periodic",
        }
    }

    pub fn parse(name: &str) -> Option<Model> {
        [Model::Slip, Model::Walker, Model::Crawler, Model::Periodic]
            .into_iter()
            .find(|m| m.as_str() == name)
    }

    /// Numeric settings and their defaults, taken from the model defaults.
    pub fn numeric_defaults(self) -> Vec<(&'static str, f64)> {
        match self {
            Model::Slip => {
                let mut v = slip_defaults();
                v.extend([("hops", 5.0), ("duration", 10.0), ("step", DEFAULT_STEP)]);
                v
            }
            Model::Periodic => {
                let mut v = slip_defaults();
                v.push(("step", DEFAULT_STEP));
                v
            }
            Model::Walker => {
                let p = WalkerParams::default();
                vec![
                    ("mass", p.mass),
                    ("gravity", p.gravity),
                    ("com_height", p.com_height),
                    ("lean", p.lean),
                    ("swing_rate_max", p.swing_rate_max),
                    ("step_angle", p.step_angle),
                    ("stride_period", p.stride_period),
                    ("duration", 10.0),
                    ("step", DEFAULT_STEP),
                ]
            }
            Model::Crawler => {
                let p = QuadParams::default();
                vec![
                    ("fore_mass", p.fore_mass),
                    ("hind_mass", p.hind_mass),
                    ("trunk_length", p.trunk_length),
                    ("leg_length", p.leg_length),
                    ("gravity", p.gravity),
                    ("crawl_period", p.crawl_period),
                    ("drive_angle_amp", p.drive_angle_amp),
                    ("hind_support_angle", p.hind_support_angle),
                    ("duration", 10.0 * p.crawl_period),
                    ("step", CRAWLER_STEP),
                ]
            }
        }
    }

    /// Components accepted by `seed_state`, with defaults.
    pub fn seed_defaults(self) -> Vec<(&'static str, f64)> {
        match self {
            Model::Slip => vec![
                ("x", 0.0),
                ("xdot", 1.0),
                ("z", 1.05),
                ("zdot", 0.0),
                ("theta", 1.35),
            ],
            Model::Periodic => vec![("z_apex", 1.2), ("xdot_apex", 0.0), ("theta_td", FRAC_PI_2)],
            Model::Walker | Model::Crawler => Vec::new(),
        }
    }
}

fn slip_defaults() -> Vec<(&'static str, f64)> {
    let p = SlipParams::default();
    vec![
        ("mass", p.mass),
        ("stiffness", p.stiffness),
        ("rest_length", p.rest_length),
        ("gravity", p.gravity),
        ("retraction_rate", p.retraction_rate),
        ("hip_torque", p.hip_torque),
        ("axial_offset", p.axial_offset),
    ]
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: Model,
    numbers: BTreeMap<&'static str, f64>,
    seed: BTreeMap<&'static str, f64>,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

impl Settings {
    pub fn defaults(model: Model) -> Self {
        Self {
            model,
            numbers: model.numeric_defaults().into_iter().collect(),
            seed: model.seed_defaults().into_iter().collect(),
            out: None,
            plot: None,
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        self.numbers[key]
    }

    pub fn seed(&self, key: &str) -> f64 {
        self.seed[key]
    }

    fn numeric_key(&self, key: &str) -> Option<&'static str> {
        self.numbers.keys().copied().find(|k| *k == key)
    }

    pub fn set_number(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let key = self.numeric_key(key).ok_or_else(|| CliError::UnknownKey(key.into()))?;
        self.numbers.insert(key, value);
        Ok(())
    }

    /// Parses and applies a `k=v,k=v` seed-state list.
    pub fn set_seed(&mut self, list: &str) -> Result<(), CliError> {
        let invalid = |reason: String| CliError::invalid("seed_state", reason);
        if self.seed.is_empty() {
            return Err(invalid(format!(
                "the {} model takes no seed state",
                self.model.as_str()
            )));
        }
        for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected k=v, got `{part}`")))?;
            let k = k.trim();
            let key = self
                .seed
                .keys()
                .copied()
                .find(|s| *s == k)
                .ok_or_else(|| invalid(format!("unknown component `{k}`")))?;
            let value = parse_number(v.trim())
                .ok_or_else(|| invalid(format!("`{}` is not a number", v.trim())))?;
            self.seed.insert(key, value);
        }
        Ok(())
    }

    /// Applies a parsed configuration file. The optional `model` entry must
    /// name this model.
    pub fn apply_file(&mut self, entries: &[Entry]) -> Result<(), CliError> {
        for e in entries {
            match e.key.as_str() {
                "model" => {
                    if e.value != self.model.as_str() {
                        return Err(CliError::invalid(
                            "model",
                            format!(
                                "file is for `{}` but the subcommand is `{}`",
                                e.value,
                                self.model.as_str()
                            ),
                        ));
                    }
                }
                "out" => self.out = Some(PathBuf::from(&e.value)),
                "plot" => self.plot = Some(PathBuf::from(&e.value)),
                "seed_state" => self.set_seed(&e.value)?,
                key => {
                    if self.numeric_key(key).is_none() {
                        return Err(CliError::UnknownKey(key.into()));
                    }
                    let v = parse_number(&e.value).ok_or_else(|| {
                        CliError::invalid(key, format!("`{}` is not a number", e.value))
                    })?;
                    self.set_number(key, v)?;
                }
            }
        }
        Ok(())
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
}

/// Splits a configuration text into entries. Everything after `#` is a
/// comment; blank lines are skipped; a repeated key is an error.
pub fn parse_config(text: &str) -> Result<Vec<Entry>, CliError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Syntax(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(CliError::Syntax(format!("line {}: missing key", n + 1)));
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(CliError::invalid_owned(key, "set more than once".into()));
        }
        entries.push(Entry {
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

pub fn read_config(path: &Path) -> Result<Vec<Entry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text)
}
