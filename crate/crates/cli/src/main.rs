use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use d2d_cache::baselines::{exhaustive_plan, exhaustive_scores, naive_plan};
use d2d_cache::dynamic::{run_cycles, ReplayProvider};
use d2d_cache::experiments::{gen_system, gen_system_popularity, gen_system_topology, run_sweep_with};
use d2d_cache::greedy::{plan_cache, Instance, Plan};
use d2d_cache::io::{self as csvio, DelayTableHeader};
use d2d_cache::model::{throughput, DelayMatrix};
use d2d_cache::{rng, CachingState, Error};

mod config;

use config::Config;

#[derive(Parser)]
#[command(name = "d2dcache", version, about = "Delay-aware caching for D2D cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set zipf_beta=0.4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (overrides `seed` from the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the CSV result here instead of standard output.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InstanceArgs {
    /// Reuse a delay table written by `delays` instead of estimating one.
    #[arg(long)]
    delays: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Random user positions in the cell.
    Topology {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo estimate of the expected link-delay table.
    Delays {
        #[command(flatten)]
        common: Common,
    },
    /// Greedy placement; writes the iteration trace.
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Write the final caching state here.
        #[arg(long)]
        phi_out: Option<PathBuf>,
        /// Write the best-source table (node ids, 0 = base station) here.
        #[arg(long)]
        sources_out: Option<PathBuf>,
        /// Stream iteration records as JSON lines.
        #[arg(long)]
        trace_jsonl: Option<PathBuf>,
    },
    /// Most-popular baseline; writes the caching state.
    Naive {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Exhaustive optimum; writes the caching state.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Maximum number of combinations to enumerate.
        #[arg(long)]
        budget: Option<u128>,
        /// Write `(combination, eta)` for every enumerated state.
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },
    /// Budgeted re-planning over several update cycles.
    Cycle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Parameter sweep averaged over random systems.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(category: &str) -> u8 {
    match category {
        "config" => 2,
        "input" | "domain" => 3,
        "capped-sample" => 4,
        "planning-complete" => 5,
        "budget" => 6,
        "io" => 7,
        _ => 1,
    }
}

fn category(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<Error>() {
        e.category()
    } else if err.downcast_ref::<io::Error>().is_some() {
        "io"
    } else {
        "internal"
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let cat = category(&err);
            eprintln!("error[{cat}]: {err:#}");
            ExitCode::from(exit_code(cat))
        }
    }
}

/// CSV destination plus the stream that receives the human-readable summary.
struct Output {
    csv: Box<dyn Write>,
    summary: Box<dyn Write>,
}

impl Output {
    fn new(path: Option<&Path>) -> Result<Output> {
        Ok(match path {
            Some(p) => Output {
                csv: Box::new(BufWriter::new(create(p)?)),
                summary: Box::new(io::stdout()),
            },
            None => Output {
                csv: Box::new(BufWriter::new(io::stdout())),
                summary: Box::new(io::stderr()),
            },
        })
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path)
        .map_err(anyhow::Error::from)
        .with_context(|| format!("creating {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path)
            .map_err(anyhow::Error::from)
            .with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn load(common: &Common) -> Result<Config> {
    let mut cfg = Config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn delay_table(cfg: &Config, args: &InstanceArgs) -> Result<DelayMatrix> {
    match &args.delays {
        Some(path) => {
            let (t, header) = csvio::read_delay_table(open(path)?)?;
            if header.n_users != cfg.system.n_users {
                return Err(Error::DimensionMismatch(format!(
                    "{} holds {} users, config has {}",
                    path.display(),
                    header.n_users,
                    cfg.system.n_users
                ))
                .into());
            }
            Ok(t)
        }
        None => Ok(gen_system(&cfg.system, cfg.run.mc_samples, cfg.run.seed)?.1),
    }
}

fn build_instance(cfg: &Config, args: &InstanceArgs) -> Result<Instance> {
    let t_avg = delay_table(cfg, args)?;
    let p = gen_system_popularity(&cfg.system, cfg.run.popularity_mode, cfg.run.seed)?;
    Ok(Instance::new(cfg.system.weights(), p, t_avg)?)
}

fn summarize(out: &mut dyn Write, label: &str, cfg: &Config, phi: &CachingState, eta: f64) -> Result<()> {
    let rate = throughput(eta, &cfg.system).unwrap_or(f64::INFINITY);
    writeln!(
        out,
        "{label}: N={} M={} mu={} seed={} eta={eta:.6} throughput={rate:.6}",
        cfg.system.n_users, cfg.system.n_files, cfg.system.cache_size, cfg.run.seed
    )?;
    for i in 0..phi.n_users() {
        let files: Vec<String> = phi.files(i).iter().map(|j| format!("F{}", j + 1)).collect();
        writeln!(out, "  U{}: {}", i + 1, files.join(" "))?;
    }
    Ok(())
}

fn write_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> d2d_cache::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Topology { common } => {
            let cfg = load(&common)?;
            let topo = gen_system_topology(&cfg.system, cfg.run.seed);
            let mut out = Output::new(common.out.as_deref())?;
            csvio::write_topology(&mut out.csv, &topo)?;
            out.csv.flush()?;
            writeln!(
                out.summary,
                "topology: N={} radius={} seed={}",
                cfg.system.n_users, cfg.system.cell_radius_m, cfg.run.seed
            )?;
        }
        Command::Delays { common } => {
            let cfg = load(&common)?;
            let (_, t_avg) = gen_system(&cfg.system, cfg.run.mc_samples, cfg.run.seed)?;
            let mut out = Output::new(common.out.as_deref())?;
            let header = DelayTableHeader {
                n_users: cfg.system.n_users,
                seed: cfg.run.seed,
                n_samples: cfg.run.mc_samples,
            };
            csvio::write_delay_table(&mut out.csv, &t_avg, header)?;
            out.csv.flush()?;
            writeln!(
                out.summary,
                "delays: N={} samples={} seed={} symmetric={}",
                cfg.system.n_users,
                cfg.run.mc_samples,
                cfg.run.seed,
                t_avg.is_symmetric()
            )?;
        }
        Command::Plan {
            common,
            instance,
            phi_out,
            sources_out,
            trace_jsonl,
        } => {
            let cfg = load(&common)?;
            let inst = build_instance(&cfg, &instance)?;
            let plan: Plan = plan_cache(&inst, cfg.system.cache_size)?;
            let mut out = Output::new(common.out.as_deref())?;
            csvio::write_trace(&mut out.csv, &plan.trace)?;
            out.csv.flush()?;
            if let Some(p) = phi_out {
                write_to(&p, |w| csvio::write_caching_state(w, &plan.phi))?;
            }
            if let Some(p) = sources_out {
                write_to(&p, |w| csvio::write_source_table(w, &plan.tables))?;
            }
            if let Some(p) = trace_jsonl {
                let mut w = BufWriter::new(create(&p)?);
                for step in &plan.trace.steps {
                    serde_json::to_writer(&mut w, step)?;
                    writeln!(w)?;
                }
                w.flush()?;
            }
            summarize(&mut out.summary, "greedy", &cfg, &plan.phi, plan.eta())?;
            writeln!(
                out.summary,
                "  candidate evaluations: {}",
                plan.trace.candidate_evaluations
            )?;
        }
        Command::Naive { common, instance } => {
            let cfg = load(&common)?;
            let inst = build_instance(&cfg, &instance)?;
            let phi = naive_plan(&inst.p, cfg.system.cache_size)?;
            let mut out = Output::new(common.out.as_deref())?;
            csvio::write_caching_state(&mut out.csv, &phi)?;
            out.csv.flush()?;
            summarize(&mut out.summary, "naive", &cfg, &phi, inst.eta(&phi))?;
        }
        Command::Oracle {
            common,
            instance,
            budget,
            scores_out,
        } => {
            let cfg = load(&common)?;
            let budget = budget.unwrap_or(cfg.run.oracle_budget as u128);
            let inst = build_instance(&cfg, &instance)?;
            let best = exhaustive_plan(&inst, cfg.system.cache_size, budget)?;
            let mut out = Output::new(common.out.as_deref())?;
            csvio::write_caching_state(&mut out.csv, &best.phi)?;
            out.csv.flush()?;
            if let Some(p) = scores_out {
                let scores = exhaustive_scores(&inst, cfg.system.cache_size, budget)?;
                write_to(&p, |w| csvio::write_scores(w, &scores))?;
            }
            summarize(&mut out.summary, "oracle", &cfg, &best.phi, best.eta)?;
            writeln!(out.summary, "  combinations: {}", best.combinations)?;
        }
        Command::Cycle { common, instance } => {
            let cfg = load(&common)?;
            let budgets = cfg.budgets()?;
            let mu = cfg.system.cache_size;
            let t_avg = delay_table(&cfg, &instance)?;
            // Cycle 0 is planned without a budget; each later cycle draws a
            // fresh popularity matrix over the same links.
            let instance_for = |kappa: u64| -> Result<Instance> {
                let seed = rng::mix(cfg.run.seed, &[kappa]);
                let p = gen_system_popularity(&cfg.system, cfg.run.popularity_mode, seed)?;
                Ok(Instance::new(cfg.system.weights(), p, t_avg.clone())?)
            };
            let initial = plan_cache(&instance_for(0)?, mu)?.phi;
            let cycles = (1..=cfg.run.n_cycles as u64)
                .map(|k| Ok((instance_for(k)?, budgets.clone())))
                .collect::<Result<Vec<_>>>()?;
            let provider = ReplayProvider { cycles };
            let (outcomes, records) = run_cycles(&provider, initial, mu, cfg.run.n_cycles)?;
            let mut out = Output::new(common.out.as_deref())?;
            csvio::write_cycle_records(&mut out.csv, &records)?;
            out.csv.flush()?;
            for (k, o) in outcomes.iter().enumerate() {
                let used: usize = o.replacements.iter().sum();
                writeln!(
                    out.summary,
                    "cycle {}: eta={:.6} replacements={used}",
                    k + 1,
                    o.plan.eta()
                )?;
            }
        }
        Command::Sweep { common } => {
            let cfg = load(&common)?;
            let spec = cfg.experiment();
            let mut out = Output::new(common.out.as_deref())?;
            writeln!(out.csv, "{}", d2d_cache::experiments::SweepRow::HEADER)?;
            let mut summary_lines = Vec::new();
            let result = run_sweep_with(&spec, |row| {
                writeln!(out.csv, "{}", row.to_csv())
                    .and_then(|_| out.csv.flush())
                    .map_err(|e| Error::InvalidInput(format!("i/o: {e}")))?;
                summary_lines.push(format!(
                    "{}={} {:>6} {:>11}: eta={:.6} +- {:.6}",
                    spec.sweep_axis,
                    row.axis,
                    row.summary.algorithm.to_string(),
                    row.summary.mode.to_string(),
                    row.summary.mean_eta,
                    row.summary.std_err_eta
                ));
                Ok(())
            });
            out.csv.flush()?;
            for line in summary_lines {
                writeln!(out.summary, "{line}")?;
            }
            result?;
        }
    }
    Ok(())
}
