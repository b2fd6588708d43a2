//! Flat `key = value` configuration files with command-line overrides.
//!
//! System parameters and run parameters share one namespace. Run keys are
//! split off first; everything else must be a `SystemConfig` field.

use std::path::Path;

use anyhow::{Context, Result};
use d2d_cache::baselines::DEFAULT_BUDGET;
use d2d_cache::experiments::{
    Algorithm, ExperimentSpec, RunSettings, SweepAxis, DEFAULT_INSTANCES, DEFAULT_MC_SAMPLES,
};
use d2d_cache::popularity::PopularityMode;
use d2d_cache::{Error, SystemConfig};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Budgets {
    Uniform(usize),
    PerUser(Vec<usize>),
}

/// Parameters that steer a run rather than describe the system.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mc_samples: usize,
    pub popularity_mode: PopularityMode,
    pub oracle_budget: u64,
    pub sweep_axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub n_instances: usize,
    pub algorithms: Vec<Algorithm>,
    pub popularity_modes: Vec<PopularityMode>,
    pub xi: Budgets,
    pub n_cycles: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            mc_samples: DEFAULT_MC_SAMPLES,
            popularity_mode: PopularityMode::Independent,
            oracle_budget: DEFAULT_BUDGET as u64,
            sweep_axis: SweepAxis::Beta,
            axis_values: vec![0.0, 0.4, 0.8, 1.2],
            n_instances: DEFAULT_INSTANCES,
            algorithms: vec![Algorithm::Greedy, Algorithm::Naive],
            popularity_modes: vec![PopularityMode::Identical, PopularityMode::Independent],
            xi: Budgets::Uniform(1),
            n_cycles: 2,
        }
    }
}

const RUN_KEYS: &[&str] = &[
    "seed",
    "mc_samples",
    "popularity_mode",
    "oracle_budget",
    "sweep_axis",
    "axis_values",
    "n_instances",
    "algorithms",
    "popularity_modes",
    "xi",
    "n_cycles",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub system: SystemConfig,
    pub run: RunConfig,
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidConfig(msg.into()).into()
}

/// Parses `key=value`; the value is read as a TOML literal and falls back
/// to a bare string (`popularity_mode=identical`).
fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{raw}` is not key=value")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key, parsed))
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<Table>()
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for raw in overrides {
            let (k, v) = parse_override(raw)?;
            table.insert(k, v);
        }
        Self::from_table(table)
    }

    pub fn from_table(mut table: Table) -> Result<Config> {
        let mut run_table = Table::new();
        for key in RUN_KEYS {
            if let Some(v) = table.remove(*key) {
                run_table.insert(key.to_string(), v);
            }
        }
        let run: RunConfig = Value::Table(run_table)
            .try_into()
            .map_err(|e| config_err(format!("run parameters: {e}")))?;
        let system: SystemConfig = Value::Table(table)
            .try_into()
            .map_err(|e| config_err(format!("system parameters: {e}")))?;
        system.validate()?;
        Ok(Config { system, run })
    }

    pub fn budgets(&self) -> Result<Vec<usize>> {
        let n = self.system.n_users;
        match &self.run.xi {
            Budgets::Uniform(x) => Ok(vec![*x; n]),
            Budgets::PerUser(v) if v.len() == n => Ok(v.clone()),
            Budgets::PerUser(v) => Err(config_err(format!("xi has {} entries for {n} users", v.len()))),
        }
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            mc_samples: self.run.mc_samples,
            oracle_budget: self.run.oracle_budget as u128,
        }
    }

    pub fn experiment(&self) -> ExperimentSpec {
        ExperimentSpec {
            sweep_axis: self.run.sweep_axis,
            axis_values: self.run.axis_values.clone(),
            n_instances: self.run.n_instances,
            algorithms: self.run.algorithms.clone(),
            popularity_modes: self.run.popularity_modes.clone(),
            base: self.system.clone(),
            master_seed: self.run.seed,
            settings: self.settings(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_overrides() {
        let text = "n_users = 4\nn_files = 6\ncache_size = 2\nseed = 9\nalgorithms = [\"greedy\"]\n";
        let mut table: Table = text.parse().unwrap();
        let (k, v) = parse_override("zipf_beta=0.8").unwrap();
        table.insert(k, v);
        let (k, v) = parse_override("popularity_mode=identical").unwrap();
        table.insert(k, v);
        let cfg = Config::from_table(table).unwrap();
        assert_eq!(cfg.system.n_users, 4);
        assert_eq!(cfg.system.zipf_beta, 0.8);
        assert_eq!(cfg.run.seed, 9);
        assert_eq!(cfg.run.popularity_mode, PopularityMode::Identical);
        assert_eq!(cfg.run.algorithms, vec![Algorithm::Greedy]);
        assert_eq!(cfg.budgets().unwrap(), vec![1; 4]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Config::from_table("n_userz = 3".parse().unwrap()).is_err());
        assert!(Config::from_table("cache_size = 500".parse().unwrap()).is_err());
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn per_user_settings() {
        let cfg = Config::from_table(
            "n_users = 2\nn_files = 3\ncache_size = 1\nuser_power_db = [10.0, 20.0]\nxi = [0, 1]"
                .parse()
                .unwrap(),
        )
        .unwrap();
        assert_eq!(cfg.budgets().unwrap(), vec![0, 1]);
        assert_eq!(cfg.system.user_power_db.db(1), 20.0);
    }
}
