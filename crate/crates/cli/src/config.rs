//! Run configurations: JSON files with defaults for every field, plus
//! `key=value` overrides on dotted paths.

use crate::error::CliError;
use growthlab_core::asymptotics::Setting;
use growthlab_core::markets::{BoundaryRule, DiffusionModel, WrightFisherSpec};
use growthlab_core::optimize::DEFAULT_MARGIN;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

fn benchmark() -> DiffusionModel {
    DiffusionModel::WrightFisher(WrightFisherSpec::benchmark())
}

/// Market path simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub model: DiffusionModel,
    pub setting: Setting,
    pub start: Option<Vec<f64>>,
    pub boundary: BoundaryRule,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: benchmark(),
            setting: Setting::Discrete { dt: 0.05, steps: 1000 },
            start: None,
            boundary: BoundaryRule::default(),
        }
    }
}

/// Log-optimal table of the model's Euler chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogoptConfig {
    pub seed: u64,
    pub model: DiffusionModel,
    pub dt: f64,
    pub boundary: BoundaryRule,
    pub resolution: usize,
    /// Kernel draws per state.
    pub samples: usize,
    pub margin: f64,
}

impl Default for LogoptConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: benchmark(),
            dt: 0.05,
            boundary: BoundaryRule::default(),
            resolution: 32,
            samples: 10_000,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Model-free backtest on a price file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub seed: u64,
    /// Class bound of the Lipschitz grid class.
    #[serde(rename = "M")]
    pub m: f64,
    pub resolution: usize,
    pub atoms: usize,
    /// Radius of the ball around the best map in the covering check.
    pub cover_radius: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            m: 5.0,
            resolution: 8,
            atoms: 1000,
            cover_radius: 0.05,
        }
    }
}

/// Reads the config file (or starts from defaults), applies `overrides`
/// and deserializes, rejecting unknown fields.
pub fn load_config<T>(file: Option<&Path>, overrides: &[String]) -> Result<T, CliError>
where
    T: DeserializeOwned + Serialize + Default,
{
    let base: T = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => T::default(),
    };
    if overrides.is_empty() {
        return Ok(base);
    }
    let mut value = serde_json::to_value(&base).map_err(|e| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

/// `a.b.c=value`; the value is read as JSON when it parses, else as a string.
fn apply_override(root: &mut Value, text: &str) -> Result<(), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {text:?} is not of the form key=value")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for part in key.split('.') {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {part:?} is not inside an object")))?;
        slot = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    *slot = parsed;
    Ok(())
}
