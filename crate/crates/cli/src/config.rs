//! Experiment configuration files.
//!
//! ```text
//! [regime]
//! regime = stable
//! alpha = 1.5
//! b = 1.0
//! d = 1.0
//! c = 1.0
//! K = 1000
//! offspring = stable(alpha=1.5)
//!
//! [experiment]
//! k = 3
//! horizon = 2.0
//! reps = 100
//! seed = 7
//!
//! [thresholds]
//! significance = 0.001
//! ```
//!
//! Lines starting with `#` or `;` are comments. Every key must be known.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use coalhaus::offspring::OffspringLaw;
use coalhaus::regime::{Regime, RegimeConfig};
use thiserror::Error;

use crate::error::CliError;

const REGIME_KEYS: &[&str] = &["regime", "alpha", "b", "d", "c", "K", "offspring"];
const EXPERIMENT_KEYS: &[&str] = &[
    "k",
    "horizon",
    "reps",
    "seed",
    "K_list",
    "out",
    "grid",
    "mode",
    "alphabet",
    "initial_size",
    "lambda",
    "n_grid",
];
const THRESHOLD_KEYS: &[&str] = &["significance", "permutations", "mean_tolerance"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key `{key}` in section [{section}]")]
    Duplicate { section: String, key: String },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
}

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("missing required parameter `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

/// Parsed `section -> key -> raw value` map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn allowed_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "regime" => Some(REGIME_KEYS),
        "experiment" => Some(EXPERIMENT_KEYS),
        "thresholds" => Some(THRESHOLD_KEYS),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: i + 1,
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim().to_string();
                if allowed_keys(&name).is_none() {
                    return Err(ConfigError::UnknownSection(name));
                }
                cfg.sections.entry(name.clone()).or_default();
                section = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            let sec = section.clone().ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: "key outside of any section".into(),
            })?;
            let key = key.trim().to_string();
            if !allowed_keys(&sec).unwrap().contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { section: sec, key });
            }
            let value = value.trim().trim_matches('"').to_string();
            let entries = cfg.sections.get_mut(&sec).unwrap();
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Duplicate { section: sec, key });
            }
        }
        Ok(cfg)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    /// Command-line values take precedence over the file.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections.entry(section.to_string()).or_default().insert(key.to_string(), value.into());
    }

    /// Entries of `other` replace those of `self`.
    pub fn merge(&mut self, other: &ExperimentConfig) {
        for (sec, entries) in &other.sections {
            for (k, v) in entries {
                self.set(sec, k, v.clone());
            }
        }
    }

    pub fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim().parse::<T>().map_err(|e| ConfigError::Value {
                            key: key.to_string(),
                            message: e.to_string(),
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Canonical `section.key=value` lines, sorted; the input of the
    /// config hash.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (sec, entries) in &self.sections {
            for (k, v) in entries {
                let _ = writeln!(s, "{sec}.{k}={v}");
            }
        }
        s
    }

    /// Builds and validates the model parameters from `[regime]`.
    pub fn regime_config(&self) -> Result<RegimeConfig, CliError> {
        let name = self.get("regime", "regime").ok_or(ValidationError::Missing("regime.regime"))?;
        let alpha: Option<f64> = self.parsed("regime", "alpha")?;
        let regime = match (name, alpha) {
            ("finite-variance", None) => Regime::FiniteVariance,
            ("neveu", None) => Regime::Neveu,
            ("stable", Some(alpha)) => Regime::Stable { alpha },
            ("stable", None) => return Err(ValidationError::Missing("regime.alpha").into()),
            ("finite-variance" | "neveu", Some(_)) => {
                return Err(ValidationError::Invalid(format!("alpha is only accepted by the stable regime, not {name}")).into())
            }
            _ => return Err(ValidationError::Invalid(format!("unknown regime `{name}`")).into()),
        };
        if let Regime::Stable { alpha } = regime {
            if !(alpha > 1.0 && alpha < 2.0) {
                return Err(ValidationError::Invalid(format!("alpha = {alpha} must lie in (1, 2)")).into());
            }
        }
        let law = match self.get("regime", "offspring") {
            Some(s) => s.parse::<OffspringLaw>().map_err(|e| ValidationError::Invalid(e.to_string()))?,
            None => match regime {
                Regime::FiniteVariance => return Err(ValidationError::Missing("regime.offspring").into()),
                Regime::Stable { alpha } => OffspringLaw::stable(alpha).map_err(|e| ValidationError::Invalid(e.to_string()))?,
                Regime::Neveu => OffspringLaw::neveu(),
            },
        };
        let num = |key: &'static str| -> Result<f64, CliError> {
            self.parsed::<f64>("regime", key)?.ok_or_else(|| ValidationError::Missing(key).into())
        };
        let big_k: u64 = self.parsed("regime", "K")?.ok_or(ValidationError::Missing("regime.K"))?;
        RegimeConfig::new(num("b")?, num("d")?, num("c")?, big_k, regime, law).map_err(CliError::invalid)
    }
}

/// `start:stop:step` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |m: &str| ConfigError::Value {
        key: "grid".into(),
        message: format!("{m}: `{s}`"),
    };
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("not a number")))
            .collect::<Result<_, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad("empty range"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| start + step * i as f64).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad("not a number")))
        .collect()
}
