//! Seeded end-to-end experiments: random systems, planners, averaged delay.
//!
//! Every instance of a sweep point draws from seed
//! `mix(master_seed, axis_index, instance_index)`, so adding axis values or
//! instances never perturbs the existing ones. Instances run in parallel but
//! are aggregated in index order.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, combination_count, naive_plan};
use crate::channel::build_delay_table;
use crate::greedy::{plan_cache, Instance};
use crate::model::{throughput, DelayMatrix, PopularityMatrix, SystemConfig, Topology};
use crate::popularity::{gen_popularity, PopularityMode};
use crate::{par, rng, Error, Result};

/// Desk-scale Monte Carlo samples per link.
pub const DEFAULT_MC_SAMPLES: usize = 2_000;
/// Desk-scale instances per sweep point.
pub const DEFAULT_INSTANCES: usize = 50;

// Sub-stream tags within one instance seed.
const TAG_TOPOLOGY: u64 = 1;
const TAG_DELAYS: u64 = 2;
const TAG_POPULARITY: u64 = 3;

/// Users uniform over the cell disk (`r = R√u`, uniform angle), base
/// station at the origin.
pub fn gen_topology(cfg: &SystemConfig, seed: u64) -> Topology {
    let mut r = rng::stream(seed);
    let positions = (0..cfg.n_users)
        .map(|_| {
            let radius = cfg.cell_radius_m * r.random::<f64>().sqrt();
            let theta = TAU * r.random::<f64>();
            [radius * theta.cos(), radius * theta.sin()]
        })
        .collect();
    Topology::from_positions(positions, [0.0, 0.0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    Naive,
    Oracle,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Naive => "naive",
            Algorithm::Oracle => "oracle",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Algorithm::Greedy),
            "naive" => Ok(Algorithm::Naive),
            "oracle" => Ok(Algorithm::Oracle),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Beta,
    Mu,
    NUsers,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Mu => "mu",
            SweepAxis::NUsers => "n_users",
        })
    }
}

impl SweepAxis {
    /// `base` with the axis parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        let as_count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!("{self} axis value {v} is not a count")))
            }
        };
        match self {
            SweepAxis::Beta => cfg.zipf_beta = value,
            SweepAxis::Mu => cfg.cache_size = as_count(value)?,
            SweepAxis::NUsers => {
                cfg.n_users = as_count(value)?;
                if cfg.channel_alloc_probs.take().is_some() {
                    warn!("n_users sweep resets channel_alloc_probs to uniform");
                }
                if let crate::model::UserPower::PerUser(_) = cfg.user_power_db {
                    return Err(Error::InvalidConfig(
                        "per-user powers cannot be combined with an n_users sweep".into(),
                    ));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Monte Carlo and search settings shared by all points of an experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub mc_samples: usize,
    pub oracle_budget: u128,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            mc_samples: DEFAULT_MC_SAMPLES,
            oracle_budget: baselines::DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub sweep_axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub n_instances: usize,
    pub algorithms: Vec<Algorithm>,
    pub popularity_modes: Vec<PopularityMode>,
    pub base: SystemConfig,
    pub master_seed: u64,
    pub settings: RunSettings,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axis_values.is_empty() {
            return Err(Error::InvalidConfig("axis_values is empty".into()));
        }
        if self.axis_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig(
                "axis_values must be strictly increasing".into(),
            ));
        }
        if self.n_instances == 0 {
            return Err(Error::InvalidConfig("n_instances must be positive".into()));
        }
        if self.algorithms.is_empty() || self.popularity_modes.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one algorithm and one popularity mode are required".into(),
            ));
        }
        if self.settings.mc_samples == 0 {
            return Err(Error::InvalidConfig("mc_samples must be positive".into()));
        }
        for &v in &self.axis_values {
            self.sweep_axis.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// Averaged outcome of one algorithm under one popularity mode.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub algorithm: Algorithm,
    pub mode: PopularityMode,
    pub mean_eta: f64,
    pub std_err_eta: f64,
    pub mean_throughput: f64,
    /// Per-instance `η`, in instance order.
    pub etas: Vec<f64>,
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub summary: PointSummary,
    pub seed: u64,
}

impl SweepRow {
    pub const HEADER: &'static str =
        "axis,algorithm,mode,mean_eta,std_err_eta,mean_throughput,n_instances,seed";

    pub fn to_csv(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.axis,
            s.algorithm,
            s.mode,
            s.mean_eta,
            s.std_err_eta,
            s.mean_throughput,
            s.etas.len(),
            self.seed
        )
    }
}

/// Topology of the random system drawn from `seed`.
pub fn gen_system_topology(cfg: &SystemConfig, seed: u64) -> Topology {
    gen_topology(cfg, rng::mix(seed, &[TAG_TOPOLOGY]))
}

/// Topology and delay table of the random system drawn from `seed`.
pub fn gen_system(cfg: &SystemConfig, mc_samples: usize, seed: u64) -> Result<(Topology, DelayMatrix)> {
    let topo = gen_system_topology(cfg, seed);
    let t_avg = build_delay_table(&topo, cfg, mc_samples, rng::mix(seed, &[TAG_DELAYS]))?;
    Ok((topo, t_avg))
}

/// Popularity matrix of the random system drawn from `seed`. Both modes use
/// the same sub-stream.
pub fn gen_system_popularity(cfg: &SystemConfig, mode: PopularityMode, seed: u64) -> Result<PopularityMatrix> {
    gen_popularity(
        mode,
        cfg.zipf_beta,
        cfg.n_users,
        cfg.n_files,
        rng::mix(seed, &[TAG_POPULARITY]),
    )
}

/// Complete planning instance of the random system drawn from `seed`.
pub fn gen_instance(
    cfg: &SystemConfig,
    mode: PopularityMode,
    mc_samples: usize,
    seed: u64,
) -> Result<(Topology, Instance)> {
    let (topo, t_avg) = gen_system(cfg, mc_samples, seed)?;
    let p = gen_system_popularity(cfg, mode, seed)?;
    Ok((topo, Instance::new(cfg.weights(), p, t_avg)?))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `n_instances` random systems for one parameter point.
///
/// Instance `k` uses seed `mix(point_seed, k)`. Every requested algorithm
/// and popularity mode is evaluated on the same topology and delay table.
/// An oracle request whose enumeration exceeds the budget is dropped from
/// the result with a warning.
pub fn run_point(
    cfg: &SystemConfig,
    modes: &[PopularityMode],
    algorithms: &[Algorithm],
    n_instances: usize,
    settings: RunSettings,
    point_seed: u64,
) -> Result<Vec<PointSummary>> {
    cfg.validate()?;
    let mut algorithms = algorithms.to_vec();
    if algorithms.contains(&Algorithm::Oracle) {
        let count = combination_count(cfg.n_users, cfg.n_files, cfg.cache_size).unwrap_or(u128::MAX);
        if count > settings.oracle_budget {
            warn!(
                "skipping oracle at N={} M={} mu={}: {count} combinations exceed budget {}",
                cfg.n_users, cfg.n_files, cfg.cache_size, settings.oracle_budget
            );
            algorithms.retain(|&a| a != Algorithm::Oracle);
        }
    }

    let per_instance = par::map_range(n_instances, |k| -> Result<Vec<f64>> {
        let seed = rng::mix(point_seed, &[k as u64]);
        let (_, t_avg) = gen_system(cfg, settings.mc_samples, seed)?;
        let mut etas = Vec::with_capacity(modes.len() * algorithms.len());
        for &mode in modes {
            let p = gen_system_popularity(cfg, mode, seed)?;
            let inst = Instance::new(cfg.weights(), p, t_avg.clone())?;
            for &alg in &algorithms {
                etas.push(eval_algorithm(&inst, alg, cfg.cache_size, settings)?);
            }
        }
        Ok(etas)
    });
    let per_instance: Vec<Vec<f64>> = per_instance.into_iter().collect::<Result<_>>()?;

    let mut out = Vec::new();
    let mut col = 0;
    for &mode in modes {
        for &algorithm in &algorithms {
            let etas: Vec<f64> = per_instance.iter().map(|row| row[col]).collect();
            let (mean_eta, std_err_eta) = mean_and_stderr(&etas);
            let rates: Vec<f64> = etas
                .iter()
                .map(|&e| throughput(e, cfg).unwrap_or(f64::INFINITY))
                .collect();
            out.push(PointSummary {
                algorithm,
                mode,
                mean_eta,
                std_err_eta,
                mean_throughput: mean_and_stderr(&rates).0,
                etas,
            });
            col += 1;
        }
    }
    Ok(out)
}

/// `η` reached by one algorithm on one instance.
pub fn eval_algorithm(inst: &Instance, alg: Algorithm, mu: usize, settings: RunSettings) -> Result<f64> {
    Ok(match alg {
        Algorithm::Greedy => inst.eta(&plan_cache(inst, mu)?.phi),
        Algorithm::Naive => inst.eta(&naive_plan(&inst.p, mu)?),
        Algorithm::Oracle => baselines::exhaustive_plan(inst, mu, settings.oracle_budget)?.eta,
    })
}

/// Seed of sweep point `axis_index`.
pub fn point_seed(master_seed: u64, axis_index: usize) -> u64 {
    rng::mix(master_seed, &[axis_index as u64])
}

/// Runs a sweep, handing each row to `sink` as soon as its point finishes.
pub fn run_sweep_with<F>(spec: &ExperimentSpec, mut sink: F) -> Result<()>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    spec.validate()?;
    for (idx, &value) in spec.axis_values.iter().enumerate() {
        let cfg = spec.sweep_axis.apply(&spec.base, value)?;
        let summaries = run_point(
            &cfg,
            &spec.popularity_modes,
            &spec.algorithms,
            spec.n_instances,
            spec.settings,
            point_seed(spec.master_seed, idx),
        )?;
        // Rows ordered by algorithm, then mode.
        for &alg in &spec.algorithms {
            for &mode in &spec.popularity_modes {
                if let Some(s) = summaries.iter().find(|s| s.algorithm == alg && s.mode == mode) {
                    sink(&SweepRow {
                        axis: value,
                        summary: s.clone(),
                        seed: spec.master_seed,
                    })?;
                }
            }
        }
    }
    Ok(())
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    run_sweep_with(spec, |r| {
        rows.push(r.clone());
        Ok(())
    })?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_inside_cell_and_deterministic() {
        let cfg = SystemConfig::with_size(1, 4, 1);
        for seed in 0..50 {
            let t = gen_topology(&cfg, seed);
            t.validate(cfg.cell_radius_m).unwrap();
        }
        let cfg = SystemConfig::with_size(30, 4, 1);
        assert_eq!(gen_topology(&cfg, 3), gen_topology(&cfg, 3));
        assert_ne!(gen_topology(&cfg, 3), gen_topology(&cfg, 4));
    }

    #[test]
    fn uniform_disk_mean_radius() {
        // 100 topologies of 1000 users: 10^5 positions in total.
        let mut cfg = SystemConfig::with_size(1000, 4, 1);
        cfg.cell_radius_m = 2.0;
        let total: f64 = (0..100).map(|s| gen_topology(&cfg, s).dist_user_bs.sum()).sum();
        let mean = total / 100_000.0;
        let expected = 2.0 * cfg.cell_radius_m / 3.0;
        assert!((mean - expected).abs() < 0.01 * expected, "{mean}");
    }

    #[test]
    fn axis_application() {
        let base = SystemConfig::with_size(4, 10, 2);
        assert_eq!(SweepAxis::Mu.apply(&base, 5.0).unwrap().cache_size, 5);
        assert!(SweepAxis::Mu.apply(&base, 2.5).is_err());
        assert!(SweepAxis::Mu.apply(&base, 11.0).is_err());
        assert_eq!(SweepAxis::NUsers.apply(&base, 7.0).unwrap().n_users, 7);
        assert_eq!(SweepAxis::Beta.apply(&base, 0.8).unwrap().zipf_beta, 0.8);
    }

    #[test]
    fn point_is_reproducible_and_skips_oracle_over_budget() {
        let cfg = SystemConfig::with_size(3, 5, 1);
        let settings = RunSettings {
            mc_samples: 200,
            oracle_budget: 10,
        };
        let algs = [Algorithm::Greedy, Algorithm::Oracle];
        let a = run_point(&cfg, &[PopularityMode::Independent], &algs, 3, settings, 8).unwrap();
        let b = run_point(&cfg, &[PopularityMode::Independent], &algs, 3, settings, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].algorithm, Algorithm::Greedy);
    }

    #[test]
    fn spec_validation() {
        let spec = ExperimentSpec {
            sweep_axis: SweepAxis::Beta,
            axis_values: vec![0.5, 0.2],
            n_instances: 2,
            algorithms: vec![Algorithm::Greedy],
            popularity_modes: vec![PopularityMode::Identical],
            base: SystemConfig::with_size(3, 5, 1),
            master_seed: 1,
            settings: RunSettings::default(),
        };
        assert!(spec.validate().is_err());
        let spec = ExperimentSpec {
            axis_values: vec![0.2, 0.5],
            ..spec
        };
        spec.validate().unwrap();
    }
}
