use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How each replicate produces observed data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Draw every arm's success count directly.
    UniformCounts,
    /// Randomize a fixed simulated science table.
    FromTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub factors: u32,
    pub units: usize,
    /// Explicit arm sizes; balanced `N / J` when `None`.
    pub arm_sizes: Option<Vec<usize>>,
    pub reps: usize,
    pub seed: u64,
    /// Upper end `U` of the uniform draw for `n_j^obs`; `n_j` when `None`.
    pub obs_max: Option<u64>,
    /// Effect whose variance ratio is recorded (`1..J`).
    pub effect: usize,
    /// Worker threads; `None` lets the pool decide, `Some(1)` runs inline.
    pub workers: Option<usize>,
    pub scheme: Scheme,
    pub bins: usize,
    pub out: Option<PathBuf>,
    pub hist: Option<PathBuf>,
    pub json: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            factors: 3,
            units: 400,
            arm_sizes: None,
            reps: 5000,
            seed: 1,
            obs_max: None,
            effect: 1,
            workers: None,
            scheme: Scheme::UniformCounts,
            bins: 20,
            out: None,
            hist: None,
            json: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("config key `{key}`: cannot parse {value:?}")))
}

impl SimConfig {
    pub fn arms(&self) -> usize {
        1usize << self.factors
    }

    pub fn resolved_arm_sizes(&self) -> Result<Vec<usize>> {
        match &self.arm_sizes {
            Some(s) => Ok(s.clone()),
            None => {
                let arms = self.arms();
                if !self.units.is_multiple_of(arms) {
                    return Err(Error::invalid(format!(
                        "balanced design needs N divisible by J: {} units over {arms} arms",
                        self.units
                    )));
                }
                Ok(vec![self.units / arms; arms])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors == 0 || self.factors > crate::design_matrix::DEFAULT_MAX_FACTORS {
            return Err(Error::invalid(format!(
                "K = {} is outside 1..=8",
                self.factors
            )));
        }
        if self.reps == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.effect == 0 || self.effect >= self.arms() {
            return Err(Error::invalid(format!(
                "effect {} outside 1..{}",
                self.effect,
                self.arms()
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        let sizes = self.resolved_arm_sizes()?;
        if sizes.len() != self.arms() {
            return Err(Error::invalid(format!(
                "expected {} arm sizes, got {}",
                self.arms(),
                sizes.len()
            )));
        }
        if sizes.iter().sum::<usize>() != self.units {
            return Err(Error::invalid("arm sizes must sum to the number of units"));
        }
        if sizes.iter().any(|&n| n < 2) {
            return Err(Error::invalid("every arm needs at least two units"));
        }
        Ok(())
    }

    /// Apply `key=value` lines. Blank lines and `#` comments are skipped;
    /// keys match the `simulate` flag names.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected key=value", no + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.replace('_', "-").as_str() {
            "k" => self.factors = parse(key, value)?,
            "units" => self.units = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "obs-max" => self.obs_max = Some(parse(key, value)?),
            "effect" => self.effect = parse(key, value)?,
            "workers" => self.workers = Some(parse(key, value)?),
            "bins" => self.bins = parse(key, value)?,
            "arm-sizes" => {
                self.arm_sizes = Some(
                    value
                        .split(',')
                        .map(|v| parse(key, v.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            "from-table" => {
                self.scheme = if parse::<bool>(key, value)? {
                    Scheme::FromTable
                } else {
                    Scheme::UniformCounts
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "hist" => self.hist = Some(PathBuf::from(value)),
            "format" => {
                self.json = match value {
                    "json" => true,
                    "table" | "text" => false,
                    _ => return Err(Error::Parse(format!("unknown format {value:?}"))),
                }
            }
            _ => return Err(Error::Parse(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }
}
