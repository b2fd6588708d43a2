//! Greedy cache placement.
//!
//! Starting from empty caches (every request served by the base station),
//! each iteration evaluates the delay improvement of every feasible
//! `<file, user>` pair, caches the best one and updates the best-source
//! table incrementally. `N·μ` iterations fill every cache.

use serde::Serialize;

use crate::model::{
    weighted_delay, CachingState, DelayMatrix, NodeId, PopularityMatrix, SourceTable, WeightVector,
};
use crate::{par, source, Error, Result};

/// Weights, popularity and link delays of one planning problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub omega: WeightVector,
    pub p: PopularityMatrix,
    pub t_avg: DelayMatrix,
}

impl Instance {
    pub fn new(omega: WeightVector, p: PopularityMatrix, t_avg: DelayMatrix) -> Result<Self> {
        if omega.len() != p.n_users() || t_avg.n_users() != p.n_users() {
            return Err(Error::DimensionMismatch(format!(
                "weights {}, popularity {}x{}, delays {}x{}",
                omega.len(),
                p.n_users(),
                p.n_files(),
                t_avg.n_users(),
                t_avg.n_users()
            )));
        }
        Ok(Instance { omega, p, t_avg })
    }

    pub fn n_users(&self) -> usize {
        self.p.n_users()
    }

    pub fn n_files(&self) -> usize {
        self.p.n_files()
    }

    /// `η` of a caching state, recomputed from scratch.
    pub fn eta(&self, phi: &CachingState) -> f64 {
        source::eta_of(&self.omega, &self.p, &self.t_avg, phi)
    }

    pub fn eta_of_tables(&self, tables: &SourceTable) -> f64 {
        weighted_delay(&self.omega, &self.p, &tables.d).expect("instance dimensions are checked")
    }

    fn check_state(&self, phi: &CachingState) -> Result<()> {
        if phi.n_users() != self.n_users() || phi.n_files() != self.n_files() {
            return Err(Error::DimensionMismatch(format!(
                "caching state is {}x{}, instance is {}x{}",
                phi.n_users(),
                phi.n_files(),
                self.n_users(),
                self.n_files()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImprovementResult {
    pub gain: f64,
    pub tables: SourceTable,
}

/// Reduction of `η` from caching file `j` at user `i`, given the current
/// best-delay matrix.
fn gain(inst: &Instance, phi: &CachingState, tables: &SourceTable, i: usize, j: usize) -> f64 {
    if phi.get(i, j) {
        return 0.0;
    }
    let d = &tables.d;
    let mut g = inst.omega.get(i) * inst.p.get(i, j) * d[[i, j]];
    for k in 0..inst.n_users() {
        if k == i {
            continue;
        }
        let via_i = inst.t_avg.get(k, i);
        if d[[k, j]] > via_i {
            g += inst.omega.get(k) * inst.p.get(k, j) * (d[[k, j]] - via_i);
        }
    }
    g
}

/// Applies the source-table update for caching file `j` at user `i`.
///
/// Equal-delay ties are resolved like [`source::best_source`] (base station
/// first, then the lowest user index), so the incremental tables always
/// equal a full rebuild.
fn commit(inst: &Instance, tables: &mut SourceTable, i: usize, j: usize) {
    tables.s[[i, j]] = NodeId::user(i);
    tables.d[[i, j]] = 0.0;
    let new_src = NodeId::user(i);
    for k in 0..inst.n_users() {
        if k == i {
            continue;
        }
        let via_i = inst.t_avg.get(k, i);
        let current = tables.d[[k, j]];
        let src = tables.s[[k, j]];
        let takes_tie = current == via_i && !src.is_bs() && src != NodeId::user(k) && new_src < src;
        if current > via_i || takes_tie {
            tables.d[[k, j]] = via_i;
            tables.s[[k, j]] = new_src;
        }
    }
}

/// Delay improvement of a single `<file, user>` pair together with the
/// tables that would result from caching it. The inputs are not modified.
pub fn delay_improvement(
    inst: &Instance,
    phi: &CachingState,
    tables: &SourceTable,
    i: usize,
    j: usize,
) -> Result<ImprovementResult> {
    inst.check_state(phi)?;
    if i >= inst.n_users() || j >= inst.n_files() {
        return Err(Error::IndexOutOfRange {
            what: "pairs",
            index: if i >= inst.n_users() { i } else { j },
            len: if i >= inst.n_users() { inst.n_users() } else { inst.n_files() },
        });
    }
    let g = gain(inst, phi, tables, i, j);
    let mut updated = tables.clone();
    if !phi.get(i, j) {
        commit(inst, &mut updated, i, j);
    }
    Ok(ImprovementResult {
        gain: g,
        tables: updated,
    })
}

/// One committed placement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanStep {
    /// 1-based iteration number.
    pub iteration: usize,
    pub user: usize,
    pub file: usize,
    pub gain: f64,
    /// `η` after this placement, maintained as `η_before − gain`.
    pub eta: f64,
    /// Candidate pairs evaluated in this iteration.
    pub evaluations: u64,
}

/// Iteration log of a greedy run.
///
/// `candidate_evaluations` counts the pairs scored by the improvement
/// routine: pairs in rows with spare capacity whose file is not yet cached
/// there (and which pass any candidate restriction). Already-cached pairs are
/// skipped without being counted, so the total never exceeds
/// [`candidate_count`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PlanTrace {
    pub eta_initial: f64,
    pub steps: Vec<PlanStep>,
    pub candidate_evaluations: u64,
}

impl PlanTrace {
    pub fn eta_final(&self) -> f64 {
        self.steps.last().map_or(self.eta_initial, |s| s.eta)
    }

    pub fn total_gain(&self) -> f64 {
        self.steps.iter().map(|s| s.gain).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub phi: CachingState,
    pub tables: SourceTable,
    pub trace: PlanTrace,
}

impl Plan {
    pub fn eta(&self) -> f64 {
        self.trace.eta_final()
    }
}

/// Incremental greedy planner state.
pub struct GreedyPlanner<'a> {
    inst: &'a Instance,
    phi: CachingState,
    tables: SourceTable,
    trace: PlanTrace,
}

struct RowBest {
    pick: Option<(usize, f64)>,
    evaluations: u64,
}

impl<'a> GreedyPlanner<'a> {
    /// All caches empty, every request served by the base station.
    pub fn new(inst: &'a Instance, mu: usize) -> Result<Self> {
        if mu > inst.n_files() {
            return Err(Error::InvalidInput(format!(
                "cache size {mu} exceeds library size {}",
                inst.n_files()
            )));
        }
        let tables = SourceTable::cellular(&inst.t_avg, inst.n_files());
        let eta_initial = inst.eta_of_tables(&tables);
        Ok(GreedyPlanner {
            inst,
            phi: CachingState::empty(inst.n_users(), inst.n_files(), mu),
            tables,
            trace: PlanTrace {
                eta_initial,
                ..Default::default()
            },
        })
    }

    pub fn phi(&self) -> &CachingState {
        &self.phi
    }

    pub fn tables(&self) -> &SourceTable {
        &self.tables
    }

    pub fn trace(&self) -> &PlanTrace {
        &self.trace
    }

    pub fn eta(&self) -> f64 {
        self.trace.eta_final()
    }

    pub fn has_spare(&self) -> bool {
        self.phi.has_spare()
    }

    /// Caches the pair with the largest delay improvement.
    pub fn best_pair(&mut self) -> Result<PlanStep> {
        self.best_pair_where(&|_, _| true)
    }

    /// Like [`best_pair`](Self::best_pair), but only pairs accepted by
    /// `allowed(user, file)` are candidates.
    ///
    /// Pairs are scanned user-major; the first pair reaching the maximum gain
    /// wins, and when every gain is zero the first feasible pair is taken.
    pub fn best_pair_where(&mut self, allowed: &(dyn Fn(usize, usize) -> bool + Sync)) -> Result<PlanStep> {
        if !self.phi.has_spare() {
            return Err(Error::PlanningComplete);
        }
        let (inst, phi, tables) = (self.inst, &self.phi, &self.tables);
        let rows = par::map_range(inst.n_users(), |i| {
            let mut row = RowBest {
                pick: None,
                evaluations: 0,
            };
            if phi.row_full(i) {
                return row;
            }
            for j in 0..inst.n_files() {
                if phi.get(i, j) || !allowed(i, j) {
                    continue;
                }
                row.evaluations += 1;
                let g = gain(inst, phi, tables, i, j);
                if row.pick.is_none_or(|(_, best)| g > best) {
                    row.pick = Some((j, g));
                }
            }
            row
        });

        let mut winner: Option<(usize, usize, f64)> = None;
        let mut evaluations = 0;
        for (i, row) in rows.into_iter().enumerate() {
            evaluations += row.evaluations;
            if let Some((j, g)) = row.pick {
                if winner.is_none_or(|(_, _, best)| g > best) {
                    winner = Some((i, j, g));
                }
            }
        }
        self.trace.candidate_evaluations += evaluations;
        let (i, j, g) = winner.ok_or_else(|| {
            Error::InvalidInput("no candidate pair satisfies the placement restriction".into())
        })?;

        self.phi.insert(i, j)?;
        commit(self.inst, &mut self.tables, i, j);
        let step = PlanStep {
            iteration: self.trace.steps.len() + 1,
            user: i,
            file: j,
            gain: g,
            eta: self.eta() - g,
            evaluations,
        };
        self.trace.steps.push(step.clone());
        Ok(step)
    }

    pub fn finish(self) -> Plan {
        Plan {
            phi: self.phi,
            tables: self.tables,
            trace: self.trace,
        }
    }
}

/// Runs the full placement loop: `N·μ` greedy iterations from empty caches.
pub fn plan_cache(inst: &Instance, mu: usize) -> Result<Plan> {
    let mut planner = GreedyPlanner::new(inst, mu)?;
    for _ in 0..inst.n_users() * mu {
        planner.best_pair()?;
    }
    Ok(planner.finish())
}

/// Size of the greedy search space, `Σ_{l=1}^{Nμ} (NM − (l−1))`, in closed
/// form `N²Mμ − ½N²μ² + ½Nμ`.
pub fn candidate_count(n: u64, m: u64, mu: u64) -> u128 {
    let (n, m, mu) = (n as u128, m as u128, mu as u128);
    assert!(mu <= m, "cache size exceeds library size");
    (2 * n * n * m * mu + n * mu - n * n * mu * mu) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::build_source_tables;

    pub(crate) fn instance_w() -> Instance {
        Instance::new(
            WeightVector::new(vec![0.5, 0.5]).unwrap(),
            PopularityMatrix::from_rows(&[vec![0.8, 0.2], vec![0.6, 0.4]]).unwrap(),
            DelayMatrix::from_rows(&[vec![10.0, 2.0], vec![2.0, 10.0]]).unwrap(),
        )
        .unwrap()
    }

    /// η difference recomputed from scratch, summed termwise to avoid
    /// cancellation.
    fn oracle_gain(inst: &Instance, phi: &CachingState, i: usize, j: usize) -> f64 {
        let before = build_source_tables(&inst.t_avg, phi).unwrap();
        let mut after_phi = phi.clone();
        after_phi.insert(i, j).unwrap();
        let after = build_source_tables(&inst.t_avg, &after_phi).unwrap();
        (0..inst.n_users())
            .map(|k| {
                let row: f64 = (0..inst.n_files())
                    .map(|f| inst.p.get(k, f) * (before.d[[k, f]] - after.d[[k, f]]))
                    .sum();
                inst.omega.get(k) * row
            })
            .sum()
    }

    #[test]
    fn worked_instance_gains() {
        let inst = instance_w();
        let phi = CachingState::empty(2, 2, 1);
        let tables = SourceTable::cellular(&inst.t_avg, 2);
        let expected = [[6.4, 2.6], [6.2, 2.8]];
        for i in 0..2 {
            for j in 0..2 {
                let r = delay_improvement(&inst, &phi, &tables, i, j).unwrap();
                assert!((r.gain - expected[i][j]).abs() < 1e-12);
                assert!((oracle_gain(&inst, &phi, i, j) - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cached_pair_has_zero_gain() {
        let inst = instance_w();
        let phi = CachingState::from_rows(&[vec![1, 0], vec![0, 0]], 1).unwrap();
        let tables = build_source_tables(&inst.t_avg, &phi).unwrap();
        let r = delay_improvement(&inst, &phi, &tables, 0, 0).unwrap();
        assert_eq!(r.gain, 0.0);
        assert_eq!(r.tables, tables);
    }

    #[test]
    fn worked_instance_iterations() {
        let inst = instance_w();
        let mut planner = GreedyPlanner::new(&inst, 1).unwrap();
        let first = planner.best_pair().unwrap();
        assert_eq!((first.user, first.file), (0, 0));
        assert!((first.gain - 6.4).abs() < 1e-12);
        assert_eq!(first.evaluations, 4);

        // U1 is full now; remaining gains are (U2,F1) 0.6 and (U2,F2) 2.8.
        let tables = planner.tables().clone();
        let g = delay_improvement(&inst, planner.phi(), &tables, 1, 0).unwrap().gain;
        assert!((g - 0.6).abs() < 1e-12);
        let second = planner.best_pair().unwrap();
        assert_eq!((second.user, second.file), (1, 1));
        assert!((second.gain - 2.8).abs() < 1e-12);
        assert_eq!(second.evaluations, 2);
        assert!(matches!(planner.best_pair(), Err(Error::PlanningComplete)));

        let plan = planner.finish();
        assert_eq!(plan.phi, CachingState::from_rows(&[vec![1, 0], vec![0, 1]], 1).unwrap());
        assert!((plan.eta() - 0.8).abs() < 1e-12);
        assert!((inst.eta(&plan.phi) - 0.8).abs() < 1e-12);
        assert_eq!(plan.tables, build_source_tables(&inst.t_avg, &plan.phi).unwrap());
    }

    #[test]
    fn zero_gains_take_first_feasible_pair() {
        let mut inst = instance_w();
        inst.omega = WeightVector::new(vec![0.0, 0.0]).unwrap();
        let plan = plan_cache(&inst, 1).unwrap();
        assert_eq!(plan.trace.steps[0].gain, 0.0);
        assert_eq!((plan.trace.steps[0].user, plan.trace.steps[0].file), (0, 0));
        assert_eq!((plan.trace.steps[1].user, plan.trace.steps[1].file), (1, 0));
        assert!(plan.phi.is_complete());
    }

    #[test]
    fn no_cache_space() {
        let inst = instance_w();
        let plan = plan_cache(&inst, 0).unwrap();
        assert!(plan.trace.steps.is_empty());
        assert!((plan.eta() - 10.0).abs() < 1e-12);
        assert!(GreedyPlanner::new(&inst, 3).is_err());
    }

    #[test]
    fn single_user_caches_most_popular() {
        let p = PopularityMatrix::from_rows(&[vec![0.1, 0.3, 0.05, 0.25, 0.3]]).unwrap();
        let inst = Instance::new(
            WeightVector::new(vec![1.0]).unwrap(),
            p,
            DelayMatrix::from_rows(&[vec![4.0]]).unwrap(),
        )
        .unwrap();
        let plan = plan_cache(&inst, 3).unwrap();
        // Sort-by-popularity oracle, ties to the lower index.
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| inst.p.get(0, b).total_cmp(&inst.p.get(0, a)));
        let mut expected = order[..3].to_vec();
        expected.sort();
        assert_eq!(plan.phi.files(0), expected);
        // Single user: every iteration scans all uncached files, so the
        // counter equals the closed form.
        assert_eq!(plan.trace.candidate_evaluations as u128, candidate_count(1, 5, 3));
    }

    #[test]
    fn candidate_count_examples() {
        assert_eq!(candidate_count(2, 2, 1), 7);
        assert_eq!(candidate_count(5, 10, 2), 455);
        assert_eq!(candidate_count(7, 9, 0), 0);
        for (n, m, mu) in [(3u64, 4u64, 2u64), (6, 11, 5), (1, 1, 1)] {
            let brute: u128 = (1..=n * mu).map(|l| (n * m - (l - 1)) as u128).sum();
            assert_eq!(candidate_count(n, m, mu), brute);
        }
    }

    #[test]
    fn tie_update_matches_rebuild() {
        // Users 1 and 2 are both one block from user 0; caching at 2 first and
        // then at 1 must hand user 0 over to the lower index.
        let inst = Instance::new(
            WeightVector::uniform(3),
            PopularityMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap(),
            DelayMatrix::from_rows(&[vec![5.0, 1.0, 1.0], vec![1.0, 5.0, 2.0], vec![1.0, 2.0, 5.0]])
                .unwrap(),
        )
        .unwrap();
        let mut phi = CachingState::empty(3, 1, 1);
        let mut tables = SourceTable::cellular(&inst.t_avg, 1);
        for user in [2, 1] {
            commit(&inst, &mut tables, user, 0);
            phi.insert(user, 0).unwrap();
        }
        assert_eq!(tables, build_source_tables(&inst.t_avg, &phi).unwrap());
        assert_eq!(tables.s[[0, 0]], NodeId::user(1));
    }
}
