//! Flat `key = value` run configuration with command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the
//! [`ColonyConfig`] field names plus the data settings below. Anything not
//! given keeps its default.
//!
//! | key | meaning |
//! |-----|---------|
//! | `data_path` | CSV file to load |
//! | `input_columns`, `output_columns` | comma-separated column names |
//! | `synth` | `noisy-sine`, `mackey-glass` or `linear-ar` |
//! | `synth_length`, `synth_noise`, `synth_seed` | synthetic series shape |
//! | `train_fraction`, `validation_fraction`, `test_fraction` | split sizes |

use std::path::PathBuf;
use std::str::FromStr;

use cants_core::{AgentParam, ColonyConfig, InitScheme};

use crate::dataio::SynthKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown setting `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{field}`: {reason}")]
    Value { field: String, value: String, reason: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("no data source: set `data_path` or `synth`")]
    NoData,
}

impl ConfigError {
    /// The offending setting, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(f) | ConfigError::Value { field: f, .. } | ConfigError::Invalid { field: f, .. } => {
                Some(f)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, inputs: Vec<String>, outputs: Vec<String> },
    Synth { kind: SynthKind, length: usize, noise: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub colony: ColonyConfig,
    pub data: Option<DataSource>,
    pub fractions: [f64; 3],
}

impl Default for Settings {
    fn default() -> Self {
        Settings { colony: ColonyConfig::default(), data: None, fractions: [0.7, 0.15, 0.15] }
    }
}

/// The eight search hyperparameters; missing ones are reported when defaulted.
pub const HYPERPARAMETERS: [&str; 8] = [
    "max_lag",
    "num_ants",
    "sensing_radius",
    "exploitation",
    "dbscan_eps",
    "dbscan_min_pts",
    "pheromone_decay",
    "pheromone_update",
];

#[derive(Debug, Default)]
struct DataKeys {
    path: Option<PathBuf>,
    inputs: Vec<String>,
    outputs: Option<Vec<String>>,
    synth: Option<SynthKind>,
    length: Option<usize>,
    noise: Option<f64>,
    seed: Option<u64>,
}

/// Accumulates settings from a file and then from overrides, later values
/// winning.
#[derive(Debug, Default)]
pub struct SettingsBuilder {
    settings: Settings,
    data: DataKeys,
    seen: Vec<String>,
}

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        field: field.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn agent_param(field: &str, value: &str) -> Result<AgentParam, ConfigError> {
    if value == "random" {
        Ok(AgentParam::Random)
    } else {
        parse::<f64>(field, value).map(AgentParam::Fixed)
    }
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl SettingsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let c = &mut self.settings.colony;
        let v = value.trim();
        match key {
            "max_lag" => c.max_lag = parse(key, v)?,
            "num_ants" => c.num_ants = parse(key, v)?,
            "sensing_radius" => c.sensing_radius = agent_param(key, v)?,
            "exploitation" => c.exploitation = agent_param(key, v)?,
            "dbscan_eps" => c.dbscan_eps = parse(key, v)?,
            "dbscan_min_pts" => c.dbscan_min_pts = parse(key, v)?,
            "pheromone_decay" => c.pheromone_decay = parse(key, v)?,
            "pheromone_update" => c.pheromone_update = parse(key, v)?,
            "population_size" => c.population_size = parse(key, v)?,
            "epochs" => c.epochs = parse(key, v)?,
            "horizon" => c.horizon = parse(key, v)?,
            "seed" => c.seed = parse(key, v)?,
            "workers" => c.workers = parse(key, v)?,
            "max_iterations" => c.max_iterations = parse(key, v)?,
            "learning_rate" => c.learning_rate = parse(key, v)?,
            "grad_clip" => c.grad_clip = parse(key, v)?,
            "init_scheme" => c.init_scheme = parse::<InitScheme>(key, v)?,
            "pheromone_max" => c.pheromone_max = parse(key, v)?,
            "initial_pheromone" => c.initial_pheromone = parse(key, v)?,
            "evict_threshold" => c.evict_threshold = parse(key, v)?,
            "data_path" => self.data.path = Some(PathBuf::from(v)),
            "input_columns" => self.data.inputs = list(v),
            "output_columns" => self.data.outputs = Some(list(v)),
            "synth" => self.data.synth = Some(parse(key, v)?),
            "synth_length" => self.data.length = Some(parse(key, v)?),
            "synth_noise" => self.data.noise = Some(parse(key, v)?),
            "synth_seed" => self.data.seed = Some(parse(key, v)?),
            "train_fraction" => self.settings.fractions[0] = parse(key, v)?,
            "validation_fraction" => self.settings.fractions[1] = parse(key, v)?,
            "test_fraction" => self.settings.fractions[2] = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        self.seen.push(key.to_string());
        Ok(())
    }

    /// Reads `key = value` lines.
    pub fn read(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k.trim(), v)
    }

    /// Hyperparameters that were never set.
    pub fn defaulted(&self) -> Vec<&'static str> {
        HYPERPARAMETERS.into_iter().filter(|h| !self.seen.iter().any(|s| s == h)).collect()
    }

    /// Validates and produces the settings. Defaulted hyperparameters are
    /// logged. A missing data source is allowed here; the caller decides.
    pub fn build(self) -> Result<Settings, ConfigError> {
        for h in self.defaulted() {
            if h == "num_ants" {
                log::info!("num_ants not set; defaulting to {}", self.settings.colony.num_ants);
            } else {
                log::debug!("{h} not set; using the default");
            }
        }
        let mut settings = self.settings;
        settings.colony.validate().map_err(|e| match e {
            cants_core::ColonyError::Config { field, reason } => {
                ConfigError::Invalid { field: field.to_string(), reason: reason.to_string() }
            }
            other => ConfigError::Invalid { field: "colony".into(), reason: other.to_string() },
        })?;
        let d = self.data;
        settings.data = match (d.path, d.synth) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid {
                    field: "synth".into(),
                    reason: "cannot be combined with data_path".into(),
                })
            }
            (Some(path), None) => Some(DataSource::Csv {
                path,
                inputs: d.inputs,
                outputs: d.outputs.unwrap_or_else(|| vec!["target".into()]),
            }),
            (None, Some(kind)) => Some(DataSource::Synth {
                kind,
                length: d.length.unwrap_or(2000),
                noise: d.noise.unwrap_or(0.05),
                seed: d.seed.unwrap_or(settings.colony.seed),
            }),
            (None, None) => None,
        };
        Ok(settings)
    }
}

/// Parses a configuration file's text followed by overrides.
pub fn load(text: &str, overrides: &[String]) -> Result<Settings, ConfigError> {
    let mut b = SettingsBuilder::new();
    b.read(text)?;
    for kv in overrides {
        b.apply_override(kv)?;
    }
    b.build()
}
