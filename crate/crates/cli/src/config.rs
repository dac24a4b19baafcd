//! Flat `key = value` run configuration. Command-line flags win over file
//! values, which win over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Every key a config file may set. Keys that a command does not use are
/// ignored, so one file can drive a whole pipeline.
pub const KNOWN_KEYS: &[&str] = &[
    "arch",
    "batch_size",
    "curve",
    "data_dir",
    "epochs",
    "eps",
    "event_order",
    "factors",
    "gain",
    "images",
    "input_mode",
    "lambda",
    "learning_rate",
    "log",
    "max_rate",
    "model",
    "models",
    "n",
    "neuron",
    "norm_subset",
    "normalization",
    "out",
    "rescale",
    "seed",
    "snn",
    "steps",
    "subset",
    "theta",
    "timesteps",
    "w",
    "workers",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "config line {}: expected key=value, found {line:?}",
                    i + 1
                )));
            };
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolves settings from flags, the config file and defaults, remembering
/// every resolved value so a run can be reproduced from its metadata.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self {
            file,
            resolved: BTreeMap::new(),
        }
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::Config(format!("config key {key}: cannot parse {s:?}: {e}")))
            })
            .transpose()
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let value = self.optional(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Display + Clone>(
        &mut self,
        key: &str,
        flag: Option<String>,
        default: &[T],
    ) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let Some(text) = self.optional::<String>(key, flag)? else {
            let joined: Vec<String> = default.iter().map(T::to_string).collect();
            self.resolved.insert(key.to_string(), joined.join(","));
            return Ok(default.to_vec());
        };
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::Config(format!("{key}: cannot parse {s:?}: {e}")))
            })
            .collect()
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}
