//! Plain-text configuration: one `key = value` per line, dotted keys for
//! nested settings, `#` starts a comment.
//!
//! ```text
//! lambda = 5
//! mu_low = 3
//! mu_high = 5
//! c = 6
//! reward = 4
//! beta = 0.5
//! holding.variant = power
//! holding.K = 1
//! holding.m = 2
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{HoldingCost, ModelParams, RewardTiming, TruncationSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("{location}key `{key}`: {message}")]
    InvalidValue { key: String, location: Location, message: String },
}

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Override,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}: "),
            Location::Override => f.write_str("--set: "),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "lambda",
    "mu_low",
    "mu_high",
    "c",
    "reward",
    "R",
    "beta",
    "reward_timing",
    "holding.variant",
    "holding.K",
    "holding.m",
    "holding.rho",
    "holding.values",
    "truncation.x_max",
    "truncation.safety_margin",
    "solver.tol",
    "solver.max_iters",
    "solver.max_x_max",
    "solver.horizon",
    "sweep.axis",
    "sweep.values",
    "critical.r_min",
    "critical.r_max",
    "critical.resolution",
    "average.beta0",
    "average.shrink",
    "average.stop_tol",
    "average.spread_tol",
    "average.max_stages",
    "sim.seed",
    "sim.replications",
    "sim.mode",
    "sim.epsilon_tail",
    "sim.T",
    "sim.x0",
    "sim.i0",
    "sim.policy.bs",
    "sim.policy.bd",
    "sim.trace",
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    location: Location,
}

/// Parsed key/value settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, message: "empty key".into() });
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            }
            if cfg.entries.contains_key(&canonical(key)) {
                return Err(ConfigError::Syntax { line, message: format!("duplicate key `{key}`") });
            }
            cfg.entries.insert(
                canonical(key),
                Entry { value: value.into(), location: Location::Line(line) },
            );
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override on top of the parsed file.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = spec.split_once('=') else {
            return Err(ConfigError::InvalidValue {
                key: spec.into(),
                location: Location::Override,
                message: "expected key=value".into(),
            });
        };
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::InvalidValue {
                key: key.into(),
                location: Location::Override,
                message: "unknown key".into(),
            });
        }
        self.entries.insert(
            canonical(key),
            Entry { value: value.trim().into(), location: Location::Override },
        );
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(
            canonical(key),
            Entry { value: value.to_string(), location: Location::Override },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(&canonical(key))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&canonical(key)).map(|e| e.value.as_str())
    }

    /// All resolved settings as `key = value` lines, sorted by key.
    pub fn resolved_lines(&self) -> Vec<String> {
        self.entries.iter().map(|(k, e)| format!("{k} = {}", e.value)).collect()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let entry = self
            .entries
            .get(&canonical(key))
            .ok_or_else(|| ConfigError::MissingKey(key.into()))?;
        entry.value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
            key: key.into(),
            location: entry.location,
            message: format!("cannot parse `{}`: {e}", entry.value),
        })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        if self.contains(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    /// Comma-separated list of numbers.
    pub fn get_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let entry = self
            .entries
            .get(&canonical(key))
            .ok_or_else(|| ConfigError::MissingKey(key.into()))?;
        if entry.value.trim().is_empty() {
            return Ok(Vec::new());
        }
        entry
            .value
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                    key: key.into(),
                    location: entry.location,
                    message: format!("cannot parse list element `{}`: {e}", s.trim()),
                })
            })
            .collect()
    }

    fn invalid(&self, key: &str, message: String) -> ConfigError {
        let location = self
            .entries
            .get(&canonical(key))
            .map(|e| e.location)
            .unwrap_or(Location::Override);
        ConfigError::InvalidValue { key: key.into(), location, message }
    }

    pub fn holding_cost(&self) -> Result<HoldingCost, ConfigError> {
        let variant: String = self.get("holding.variant")?;
        let h = match variant.to_ascii_lowercase().as_str() {
            "power" => HoldingCost::Power { k: self.get("holding.K")?, m: self.get("holding.m")? },
            "exponential" => {
                HoldingCost::Exponential { k: self.get("holding.K")?, rho: self.get("holding.rho")? }
            }
            "tabular" => HoldingCost::Tabular(self.get_list("holding.values")?),
            other => {
                return Err(self.invalid(
                    "holding.variant",
                    format!("expected power, exponential or tabular, got `{other}`"),
                ))
            }
        };
        h.validate().map_err(|e| self.invalid("holding.variant", e.to_string()))?;
        Ok(h)
    }

    pub fn reward_timing(&self) -> Result<RewardTiming, ConfigError> {
        let raw: String = self.get_or("reward_timing", "admission".to_string())?;
        match raw.to_ascii_lowercase().as_str() {
            "admission" => Ok(RewardTiming::AtAdmission),
            "departure" => Ok(RewardTiming::AtDeparture),
            other => Err(self.invalid(
                "reward_timing",
                format!("expected admission or departure, got `{other}`"),
            )),
        }
    }

    /// The model parameters. Every rate, both costs, the reward, the
    /// discount rate and the holding-cost family are required.
    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let m = ModelParams {
            lambda: self.get("lambda")?,
            mu_low: self.get("mu_low")?,
            mu_high: self.get("mu_high")?,
            service_cost: self.get("c")?,
            reward: self.get("reward")?,
            beta: self.get("beta")?,
            holding: self.holding_cost()?,
            reward_timing: self.reward_timing()?,
        };
        m.validate().map_err(|e| {
            let key = match &e {
                crate::error::Error::InvalidParameter { name, .. } => *name,
                _ => "holding.variant",
            };
            self.invalid(key, e.to_string())
        })?;
        Ok(m)
    }

    pub fn truncation(&self) -> Result<TruncationSpec, ConfigError> {
        let d = TruncationSpec::default();
        let t = TruncationSpec {
            x_max: self.get_or("truncation.x_max", d.x_max)?,
            safety_margin: self.get_or("truncation.safety_margin", d.safety_margin)?,
        };
        t.validate().map_err(|e| self.invalid("truncation.x_max", e.to_string()))?;
        Ok(t)
    }
}

fn canonical(key: &str) -> String {
    match key {
        "R" => "reward".into(),
        other => other.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# Figure base instance
lambda = 5
mu_low = 3
mu_high = 5
c = 6
R = 4          # alias for reward
beta = 0.5
holding.variant = power
holding.K = 1
holding.m = 2
";

    #[test]
    fn parses_model() {
        let cfg = Config::parse(SAMPLE).unwrap();
        let m = cfg.model_params().unwrap();
        assert_eq!(m.lambda, 5.0);
        assert_eq!(m.reward, 4.0);
        assert_eq!(m.holding, HoldingCost::Power { k: 1.0, m: 2.0 });
        assert_eq!(m.reward_timing, RewardTiming::AtAdmission);
        assert_eq!(cfg.truncation().unwrap(), TruncationSpec::default());
    }

    #[test]
    fn missing_key_is_named() {
        let text = SAMPLE.replace("beta = 0.5\n", "");
        let err = Config::parse(&text).unwrap().model_params().unwrap_err();
        assert_eq!(err, ConfigError::MissingKey("beta".into()));
        assert!(err.to_string().contains("beta"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = Config::parse("lambda = 1\nmu_low 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
        let err = Config::parse("lambda = 1\n\nspeed = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 3, .. }));
        let err = Config::parse("lambda = 1\nlambda = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
    }

    #[test]
    fn bad_values_report_location() {
        let text = SAMPLE.replace("lambda = 5", "lambda = five");
        let err = Config::parse(&text).unwrap().model_params().unwrap_err();
        assert!(err.to_string().starts_with("line 2: key `lambda`"), "{err}");
    }

    #[test]
    fn overrides_apply_after_file() {
        let mut cfg = Config::parse(SAMPLE).unwrap();
        cfg.apply_override("reward=7.5").unwrap();
        cfg.apply_override("holding.m = 3").unwrap();
        let m = cfg.model_params().unwrap();
        assert_eq!(m.reward, 7.5);
        assert_eq!(m.holding, HoldingCost::Power { k: 1.0, m: 3.0 });
        assert!(cfg.apply_override("nonsense=1").is_err());
        assert!(cfg.apply_override("lambda").is_err());
    }

    #[test]
    fn tabular_and_timing() {
        let text = SAMPLE
            .replace("holding.variant = power", "holding.variant = tabular\nholding.values = 0, 1, 3, 6")
            .replace("holding.K = 1\nholding.m = 2\n", "reward_timing = departure\n");
        let m = Config::parse(&text).unwrap().model_params().unwrap();
        assert_eq!(m.holding, HoldingCost::Tabular(vec![0.0, 1.0, 3.0, 6.0]));
        assert_eq!(m.reward_timing, RewardTiming::AtDeparture);
    }

    #[test]
    fn invalid_model_is_reported() {
        let text = SAMPLE.replace("mu_high = 5", "mu_high = 2");
        let err = Config::parse(&text).unwrap().model_params().unwrap_err();
        assert!(err.to_string().contains("mu_high"), "{err}");
    }
}
