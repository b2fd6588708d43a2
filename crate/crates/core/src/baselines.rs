//! Reference placements: most-popular caching and exhaustive search.

use std::cmp::Ordering;

use crate::greedy::Instance;
use crate::model::{CachingState, PopularityMatrix};
use crate::{par, Error, Result};

/// Default limit on the number of caching combinations `exhaustive_plan`
/// is willing to enumerate.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Each user caches its `mu` most popular files; ties go to the lower index.
pub fn naive_plan(p: &PopularityMatrix, mu: usize) -> Result<CachingState> {
    if mu > p.n_files() {
        return Err(Error::InvalidInput(format!(
            "cache size {mu} exceeds library size {}",
            p.n_files()
        )));
    }
    let mut phi = CachingState::empty(p.n_users(), p.n_files(), mu);
    for i in 0..p.n_users() {
        let mut order: Vec<usize> = (0..p.n_files()).collect();
        // Stable sort keeps lower indices first among equal probabilities.
        order.sort_by(|&a, &b| p.get(i, b).total_cmp(&p.get(i, a)));
        for &j in &order[..mu] {
            phi.insert(i, j)?;
        }
    }
    Ok(phi)
}

/// `C(m, k)`, or `None` on overflow.
pub fn binomial(m: u64, k: u64) -> Option<u128> {
    if k > m {
        return Some(0);
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc.checked_mul((m - t) as u128)? / (t as u128 + 1);
    }
    Some(acc)
}

/// Number of complete caching states, `C(M, μ)^N`.
pub fn combination_count(n: usize, m: usize, mu: usize) -> Option<u128> {
    let per_user = binomial(m as u64, mu as u64)?;
    (0..n).try_fold(1u128, |acc, _| acc.checked_mul(per_user))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveResult {
    pub phi: CachingState,
    pub eta: f64,
    pub combinations: u128,
}

/// All `k`-subsets of `0..m` in lexicographic order.
fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Advance the rightmost index that still has room.
        let Some(pos) = (0..k).rev().find(|&p| cur[p] < m - k + p) else {
            return out;
        };
        cur[pos] += 1;
        for q in pos + 1..k {
            cur[q] = cur[q - 1] + 1;
        }
    }
}

fn state_from(digits: &[usize], subsets: &[Vec<usize>], m: usize, mu: usize) -> CachingState {
    let mut phi = CachingState::empty(digits.len(), m, mu);
    for (i, &d) in digits.iter().enumerate() {
        for &j in &subsets[d] {
            phi.insert(i, j).expect("subsets have distinct files");
        }
    }
    phi
}

/// True if `a` precedes `b` as a row-major bit string.
fn lex_less(a: &CachingState, b: &CachingState) -> bool {
    a.lex_key().cmp(b.lex_key()) == Ordering::Less
}

fn better(cand: &(f64, CachingState), best: &(f64, CachingState)) -> bool {
    cand.0 < best.0 || (cand.0 == best.0 && lex_less(&cand.1, &best.1))
}

/// Visits every combination whose first user takes subset `first`, in
/// mixed-radix order with the last user varying fastest.
fn for_each_with_first<F: FnMut(&[usize], &CachingState)>(
    n: usize,
    first: usize,
    subsets: &[Vec<usize>],
    m: usize,
    mu: usize,
    mut visit: F,
) {
    let radix = subsets.len();
    let mut digits = vec![0; n];
    digits[0] = first;
    loop {
        let phi = state_from(&digits, subsets, m, mu);
        visit(&digits, &phi);
        let Some(pos) = (1..n).rev().find(|&p| digits[p] + 1 < radix) else {
            return;
        };
        digits[pos] += 1;
        for d in digits.iter_mut().skip(pos + 1) {
            *d = 0;
        }
    }
}

fn check_budget(inst: &Instance, mu: usize, budget: u128) -> Result<u128> {
    if mu > inst.n_files() {
        return Err(Error::InvalidInput(format!(
            "cache size {mu} exceeds library size {}",
            inst.n_files()
        )));
    }
    let combinations =
        combination_count(inst.n_users(), inst.n_files(), mu).unwrap_or(u128::MAX);
    if combinations > budget {
        return Err(Error::BudgetExceeded {
            combinations,
            budget,
        });
    }
    Ok(combinations)
}

/// Globally optimal placement by enumerating every complete caching state.
///
/// Ties in `η` go to the lexicographically smallest `Φ` (row-major, 0 < 1).
/// The enumeration is partitioned by the first user's subset.
pub fn exhaustive_plan(inst: &Instance, mu: usize, budget: u128) -> Result<ExhaustiveResult> {
    let combinations = check_budget(inst, mu, budget)?;
    let (n, m) = (inst.n_users(), inst.n_files());
    let subsets = subsets(m, mu);

    let partials = par::map_range(subsets.len(), |first| {
        let mut best: Option<(f64, CachingState)> = None;
        for_each_with_first(n, first, &subsets, m, mu, |_, phi| {
            let eta = inst.eta(phi);
            let improves = best
                .as_ref()
                .is_none_or(|b| eta < b.0 || (eta == b.0 && lex_less(phi, &b.1)));
            if improves {
                best = Some((eta, phi.clone()));
            }
        });
        best.expect("every partition holds at least one combination")
    });

    let (eta, phi) = partials
        .into_iter()
        .reduce(|best, cand| if better(&cand, &best) { cand } else { best })
        .expect("at least one partition");
    Ok(ExhaustiveResult {
        phi,
        eta,
        combinations,
    })
}

/// `(combination index, η)` for every complete caching state, in the same
/// order as the enumeration. Index digits are the per-user subset ranks in
/// lexicographic subset order, user 1 most significant.
pub fn exhaustive_scores(inst: &Instance, mu: usize, budget: u128) -> Result<Vec<(u128, f64)>> {
    check_budget(inst, mu, budget)?;
    let (n, m) = (inst.n_users(), inst.n_files());
    let subsets = subsets(m, mu);
    let radix = subsets.len() as u128;
    let mut out = Vec::new();
    for first in 0..subsets.len() {
        for_each_with_first(n, first, &subsets, m, mu, |digits, phi| {
            let index = digits.iter().fold(0u128, |acc, &d| acc * radix + d as u128);
            out.push((index, inst.eta(phi)));
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::plan_cache;
    use crate::model::{DelayMatrix, WeightVector};

    fn instance_w() -> Instance {
        Instance::new(
            WeightVector::new(vec![0.5, 0.5]).unwrap(),
            PopularityMatrix::from_rows(&[vec![0.8, 0.2], vec![0.6, 0.4]]).unwrap(),
            DelayMatrix::from_rows(&[vec![10.0, 2.0], vec![2.0, 10.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn naive_examples() {
        let inst = instance_w();
        let phi = naive_plan(&inst.p, 1).unwrap();
        assert_eq!(phi, CachingState::from_rows(&[vec![1, 0], vec![1, 0]], 1).unwrap());
        assert!((inst.eta(&phi) - 3.0).abs() < 1e-12);

        let full = naive_plan(&inst.p, 2).unwrap();
        assert!(full.as_array().iter().all(|&b| b));
        assert_eq!(inst.eta(&full), 0.0);

        let p = PopularityMatrix::from_rows(&[vec![0.25; 4]]).unwrap();
        assert_eq!(naive_plan(&p, 2).unwrap().files(0), vec![0, 1]);
        assert!(naive_plan(&p, 5).is_err());
    }

    #[test]
    fn exhaustive_worked_instance() {
        let inst = instance_w();
        let scores = exhaustive_scores(&inst, 1, DEFAULT_BUDGET).unwrap();
        let etas: Vec<f64> = scores.iter().map(|s| s.1).collect();
        for (got, want) in etas.iter().zip([3.0, 0.8, 1.2, 7.0]) {
            assert!((got - want).abs() < 1e-12, "{etas:?}");
        }
        let best = exhaustive_plan(&inst, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(best.phi, CachingState::from_rows(&[vec![1, 0], vec![0, 1]], 1).unwrap());
        assert!((best.eta - 0.8).abs() < 1e-12);
        assert_eq!(best.combinations, 4);
        assert_eq!(plan_cache(&inst, 1).unwrap().phi, best.phi);
    }

    #[test]
    fn full_cache_is_unique_solution() {
        let inst = instance_w();
        let best = exhaustive_plan(&inst, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(best.combinations, 1);
        assert_eq!(best.eta, 0.0);
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        // All-zero weights: every state has η = 0, so the smallest bit string wins.
        let mut inst = instance_w();
        inst.omega = WeightVector::new(vec![0.0, 0.0]).unwrap();
        let best = exhaustive_plan(&inst, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(best.phi, CachingState::from_rows(&[vec![0, 1], vec![0, 1]], 1).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let inst = instance_w();
        match exhaustive_plan(&inst, 1, 3) {
            Err(Error::BudgetExceeded { combinations, budget }) => {
                assert_eq!((combinations, budget), (4, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn counting_helpers() {
        assert_eq!(binomial(6, 2), Some(15));
        assert_eq!(binomial(10, 0), Some(1));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(combination_count(4, 6, 2), Some(50_625));
        assert_eq!(combination_count(5, 10, 2), Some(184_528_125));
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
    }
}
