//! Multi-cycle re-planning under a per-user cache replacement budget.
//!
//! Each cycle re-runs the greedy loop from empty caches with that cycle's
//! weights, popularity and delays. A user whose count of newly introduced
//! files (files not in its previous cache) has reached its budget `ξ_i` may
//! from then on only pick files from its previous cache. Since a full row
//! with `r` new files differs from the previous row in `2r` positions, every
//! output satisfies `Σ_j |φ_ij − φ'_ij| ≤ 2ξ_i`.

use serde::Serialize;

use crate::greedy::{GreedyPlanner, Instance, Plan};
use crate::model::CachingState;
use crate::{Error, Result};

/// Parameters of one update cycle. `tau` is carried for reporting only.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleParams {
    pub kappa: usize,
    pub instance: Instance,
    pub xi: Vec<usize>,
    pub prev_phi: CachingState,
    pub tau: f64,
}

impl CycleParams {
    pub fn validate(&self, mu: usize) -> Result<()> {
        let n = self.instance.n_users();
        if self.xi.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} replacement budgets for {n} users",
                self.xi.len()
            )));
        }
        if self.prev_phi.n_users() != n || self.prev_phi.n_files() != self.instance.n_files() {
            return Err(Error::DimensionMismatch(
                "previous caching state does not match the instance".into(),
            ));
        }
        if let Some(i) = self.xi.iter().position(|&x| x > mu) {
            return Err(Error::InvalidInput(format!(
                "user {i}: budget {} exceeds cache size {mu}",
                self.xi[i]
            )));
        }
        if let Some(i) = (0..n).find(|&i| self.prev_phi.row_fill(i) != mu) {
            return Err(Error::InvalidInput(format!(
                "user {i}: previous cache holds {} files, expected {mu}",
                self.prev_phi.row_fill(i)
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleOutcome {
    pub plan: Plan,
    /// Files per user that were not in the previous cache.
    pub replacements: Vec<usize>,
}

fn new_files(phi: &CachingState, prev: &CachingState, i: usize) -> usize {
    (0..phi.n_files())
        .filter(|&j| phi.get(i, j) && !prev.get(i, j))
        .count()
}

/// Greedy placement for one cycle subject to the replacement budgets.
pub fn plan_cycle(params: &CycleParams, mu: usize) -> Result<CycleOutcome> {
    params.validate(mu)?;
    let inst = &params.instance;
    let prev = &params.prev_phi;
    let mut planner = GreedyPlanner::new(inst, mu)?;
    for _ in 0..inst.n_users() * mu {
        // Budgets are re-checked after every commit.
        let locked: Vec<bool> = (0..inst.n_users())
            .map(|i| new_files(planner.phi(), prev, i) >= params.xi[i])
            .collect();
        planner.best_pair_where(&|i, j| !locked[i] || prev.get(i, j))?;
    }
    let plan = planner.finish();
    let replacements = (0..inst.n_users())
        .map(|i| new_files(&plan.phi, prev, i))
        .collect();
    Ok(CycleOutcome { plan, replacements })
}

/// Supplies the parameters of cycle `kappa`.
pub trait ParameterProvider {
    fn instance(&self, kappa: usize) -> Result<Instance>;

    fn budgets(&self, kappa: usize) -> Result<Vec<usize>>;

    fn duration(&self, _kappa: usize) -> f64 {
        1.0
    }
}

/// Replays pre-computed per-cycle parameters.
#[derive(Clone, Debug)]
pub struct ReplayProvider {
    pub cycles: Vec<(Instance, Vec<usize>)>,
}

impl ParameterProvider for ReplayProvider {
    fn instance(&self, kappa: usize) -> Result<Instance> {
        self.cycles
            .get(kappa - 1)
            .map(|c| c.0.clone())
            .ok_or_else(|| Error::InvalidInput(format!("no parameters for cycle {kappa}")))
    }

    fn budgets(&self, kappa: usize) -> Result<Vec<usize>> {
        self.cycles
            .get(kappa - 1)
            .map(|c| c.1.clone())
            .ok_or_else(|| Error::InvalidInput(format!("no budgets for cycle {kappa}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRecord {
    pub kappa: usize,
    pub user: usize,
    pub replacements: usize,
    pub eta: f64,
}

/// Runs cycles `1..=n_cycles` starting from `initial`, feeding each
/// cycle's output forward as the next cycle's previous state.
pub fn run_cycles<P: ParameterProvider>(
    provider: &P,
    initial: CachingState,
    mu: usize,
    n_cycles: usize,
) -> Result<(Vec<CycleOutcome>, Vec<CycleRecord>)> {
    let mut prev = initial;
    let mut outcomes = Vec::with_capacity(n_cycles);
    let mut records = Vec::new();
    for kappa in 1..=n_cycles {
        let params = CycleParams {
            kappa,
            instance: provider.instance(kappa)?,
            xi: provider.budgets(kappa)?,
            prev_phi: prev,
            tau: provider.duration(kappa),
        };
        let outcome = plan_cycle(&params, mu)?;
        let eta = outcome.plan.eta();
        records.extend(outcome.replacements.iter().enumerate().map(|(user, &r)| CycleRecord {
            kappa,
            user,
            replacements: r,
            eta,
        }));
        prev = outcome.plan.phi.clone();
        outcomes.push(outcome);
    }
    Ok((outcomes, records))
}
