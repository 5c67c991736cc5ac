//! `key = value` scenario files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; omitted keys take the documented defaults. Unknown keys,
//! unparsable values and out-of-range values are errors that name the key
//! and the line.

use std::fmt::Write as _;
use std::path::Path;

use crate::joint::LayerParams;
use crate::robust::{MEstimateConfig, DEFAULT_C1, DEFAULT_LAMBDA_SIGMA, DEFAULT_WINDOW_LEN, DEFAULT_XI_FLOOR_SCALE};
use crate::sim::StarScenario;

/// Recognised keys, in echo order.
pub const KEYS: [&str; 17] = [
    "si_len",
    "rt_len",
    "isr_db",
    "snr_db",
    "impulse_prob",
    "impulse_var_ratio",
    "ns",
    "sample_rate_hz",
    "bandwidth_hz",
    "seed",
    "layers",
    "mu",
    "gamma",
    "lambda_sigma",
    "nw",
    "c1",
    "exclude_first_layer",
];

pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_GAMMA: f64 = 1.0;

/// Error from parsing or validating a configuration entry.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(key: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        Self { key: key.to_string(), line, message: message.into() }
    }
}

/// Scenario plus estimator hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: StarScenario,
    pub layers: usize,
    /// Step size. When unset each experiment uses its reference value.
    pub mu: Option<f64>,
    pub gamma: f64,
    pub lambda_sigma: f64,
    pub nw: usize,
    pub c1: f64,
    pub exclude_first_layer: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            scenario: StarScenario::default(),
            layers: DEFAULT_LAYERS,
            mu: None,
            gamma: DEFAULT_GAMMA,
            lambda_sigma: DEFAULT_LAMBDA_SIGMA,
            nw: DEFAULT_WINDOW_LEN,
            c1: DEFAULT_C1,
            exclude_first_layer: false,
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, raw: &str, line: Option<usize>) -> Result<V, ConfigError> {
    raw.parse()
        .map_err(|_| ConfigError::new(key, line, format!("cannot parse value `{raw}`")))
}

fn parse_bool(key: &str, raw: &str, line: Option<usize>) -> Result<bool, ConfigError> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::new(key, line, format!("expected a boolean, got `{raw}`"))),
    }
}

impl Config {
    /// Sets one key from its textual value. `line` is only used for messages.
    pub fn set(&mut self, key: &str, raw: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let raw = raw.trim();
        let sc = &mut self.scenario;
        match key {
            "si_len" => sc.si_len = parse_value(key, raw, line)?,
            "rt_len" => sc.rt_len = parse_value(key, raw, line)?,
            "isr_db" => sc.isr_db = parse_value(key, raw, line)?,
            "snr_db" => sc.snr_db = parse_value(key, raw, line)?,
            "impulse_prob" => sc.impulse_prob = parse_value(key, raw, line)?,
            "impulse_var_ratio" => sc.impulse_var_ratio = parse_value(key, raw, line)?,
            "ns" => sc.ns = parse_value(key, raw, line)?,
            "sample_rate_hz" => sc.sample_rate_hz = parse_value(key, raw, line)?,
            "bandwidth_hz" => sc.bandwidth_hz = parse_value(key, raw, line)?,
            "seed" => sc.seed = parse_value(key, raw, line)?,
            "layers" => self.layers = parse_value(key, raw, line)?,
            "mu" => self.mu = Some(parse_value(key, raw, line)?),
            "gamma" => self.gamma = parse_value(key, raw, line)?,
            "lambda_sigma" => self.lambda_sigma = parse_value(key, raw, line)?,
            "nw" => self.nw = parse_value(key, raw, line)?,
            "c1" => self.c1 = parse_value(key, raw, line)?,
            "exclude_first_layer" => self.exclude_first_layer = parse_bool(key, raw, line)?,
            _ => return Err(ConfigError::new(key, line, "unknown key")),
        }
        self.check_key(key, line)
    }

    fn check_key(&self, key: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let sc = &self.scenario;
        let bad = |msg: &str| Err(ConfigError::new(key, line, msg));
        match key {
            "si_len" if sc.si_len == 0 => bad("must be at least 1"),
            "rt_len" if sc.rt_len == 0 => bad("must be at least 1"),
            "ns" if sc.ns == 0 => bad("must be at least 1"),
            "isr_db" if !sc.isr_db.is_finite() => bad("must be finite"),
            "snr_db" if !sc.snr_db.is_finite() => bad("must be finite"),
            "impulse_prob" if !(0.0..=1.0).contains(&sc.impulse_prob) => bad("must lie in [0, 1]"),
            "impulse_var_ratio" if !(sc.impulse_var_ratio > 0.0 && sc.impulse_var_ratio.is_finite()) => {
                bad("must be positive")
            }
            "sample_rate_hz" if !(sc.sample_rate_hz > 0.0 && sc.sample_rate_hz.is_finite()) => bad("must be positive"),
            "bandwidth_hz" if !(sc.bandwidth_hz > 0.0 && sc.bandwidth_hz.is_finite()) => bad("must be positive"),
            "layers" if self.layers == 0 => bad("must be at least 1"),
            "mu" if !self.mu.is_some_and(|m| m > 0.0 && m.is_finite()) => bad("must be positive"),
            "gamma" if !(self.gamma > 0.0 && self.gamma.is_finite()) => bad("must be positive"),
            "lambda_sigma" if !(self.lambda_sigma >= 0.9 && self.lambda_sigma < 1.0) => bad("must lie in [0.9, 1)"),
            "nw" if self.nw < 2 => bad("must be at least 2"),
            "c1" if !(self.c1 > 0.0 && self.c1.is_finite()) => bad("must be positive"),
            _ => Ok(()),
        }
    }

    /// Cross-key checks that can only run once every key is known.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for key in KEYS {
            if key == "mu" && self.mu.is_none() {
                continue;
            }
            self.check_key(key, None)?;
        }
        if self.exclude_first_layer && self.layers < 2 {
            return Err(ConfigError::new(
                "exclude_first_layer",
                None,
                "needs at least two layers",
            ));
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::new(trimmed, Some(line), "expected `key = value`"));
            };
            cfg.set(key.trim(), value, Some(line))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Step size to use, given the experiment's reference value.
    pub fn mu_or(&self, reference: f64) -> f64 {
        self.mu.unwrap_or(reference)
    }

    pub fn mest_config(&self) -> MEstimateConfig<f64> {
        MEstimateConfig {
            lambda_sigma: self.lambda_sigma,
            c1: self.c1,
            window_len: self.nw,
            xi_floor_scale: DEFAULT_XI_FLOOR_SCALE,
        }
    }

    pub fn layer_params(&self, mu: f64) -> LayerParams<f64> {
        LayerParams { step_size: mu, gamma: self.gamma, mest: self.mest_config() }
    }

    /// Effective configuration in the file format, one `key = value` per line.
    /// `mu` is printed as resolved by the caller.
    pub fn echo(&self, mu: f64) -> String {
        let sc = &self.scenario;
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "si_len" => sc.si_len.to_string(),
                "rt_len" => sc.rt_len.to_string(),
                "isr_db" => sc.isr_db.to_string(),
                "snr_db" => sc.snr_db.to_string(),
                "impulse_prob" => sc.impulse_prob.to_string(),
                "impulse_var_ratio" => sc.impulse_var_ratio.to_string(),
                "ns" => sc.ns.to_string(),
                "sample_rate_hz" => sc.sample_rate_hz.to_string(),
                "bandwidth_hz" => sc.bandwidth_hz.to_string(),
                "seed" => sc.seed.to_string(),
                "layers" => self.layers.to_string(),
                "mu" => mu.to_string(),
                "gamma" => self.gamma.to_string(),
                "lambda_sigma" => self.lambda_sigma.to_string(),
                "nw" => self.nw.to_string(),
                "c1" => self.c1.to_string(),
                "exclude_first_layer" => self.exclude_first_layer.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}
