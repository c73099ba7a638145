//! Run configuration: every tunable of a command-line run, loadable from a
//! flat `key = value` file. Command-line flags override file values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scaling::ScalingParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidParams(format!("unknown format {other:?} (expected json or csv)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ScalingParams,
    pub format: OutputFormat,
    pub jobs: usize,
    /// Seed for distortion generation; the scoring pipeline itself is
    /// deterministic and seed-free.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { params: ScalingParams::default(), format: OutputFormat::Json, jobs: 1, seed: 0 }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidParams(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Sets one key. Recognized keys: `k1`, `k2`, `cr_threshold`, `mode`,
    /// `sigma_floor`, `include_approximation`, `format`, `jobs`, `seed`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k1" => self.params.k1 = parse_value(key, value)?,
            "k2" => self.params.k2 = parse_value(key, value)?,
            "cr_threshold" => self.params.cr_threshold = parse_value(key, value)?,
            "sigma_floor" => self.params.sigma_floor = parse_value(key, value)?,
            "include_approximation" => self.params.include_approximation = parse_value(key, value)?,
            "mode" => self.params.mode = value.parse()?,
            "format" => self.format = value.parse()?,
            "jobs" => self.jobs = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            other => return Err(Error::InvalidParams(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("config line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::InvalidParams(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::InvalidParams("jobs must be >= 1".into()));
        }
        self.params.validate()
    }
}
