//! Best-source selection: for every request `(user, file)`, the holder with
//! the lowest expected delay and that delay.

use ndarray::Array2;

use crate::model::{CachingState, DelayMatrix, NodeId, PopularityMatrix, SourceTable, WeightVector};
use crate::{Error, Result};

/// Best source for user `i` requesting file `j`.
///
/// Ties go to the base station first, then to the lowest user index.
#[inline]
pub fn best_source(i: usize, j: usize, t_avg: &DelayMatrix, phi: &CachingState) -> (NodeId, f64) {
    if phi.get(i, j) {
        return (NodeId::user(i), 0.0);
    }
    let mut best = (NodeId::BS, t_avg.bs_delay(i));
    for k in 0..phi.n_users() {
        if k != i && phi.get(k, j) {
            let d = t_avg.get(i, k);
            if d < best.1 {
                best = (NodeId::user(k), d);
            }
        }
    }
    best
}

fn check_dims(t_avg: &DelayMatrix, phi: &CachingState) -> Result<()> {
    if t_avg.n_users() != phi.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "delay matrix has {} users, caching state has {}",
            t_avg.n_users(),
            phi.n_users()
        )));
    }
    Ok(())
}

pub fn build_source_tables(t_avg: &DelayMatrix, phi: &CachingState) -> Result<SourceTable> {
    check_dims(t_avg, phi)?;
    let (n, m) = (phi.n_users(), phi.n_files());
    let mut s = Array2::from_elem((n, m), NodeId::BS);
    let mut d = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let (src, delay) = best_source(i, j, t_avg, phi);
            s[[i, j]] = src;
            d[[i, j]] = delay;
        }
    }
    Ok(SourceTable { s, d })
}

/// `η` for a caching state without materialising the tables. Sums in the
/// same order as [`crate::model::weighted_delay`], so the two agree bit for bit.
pub fn eta_of(
    omega: &WeightVector,
    p: &PopularityMatrix,
    t_avg: &DelayMatrix,
    phi: &CachingState,
) -> f64 {
    (0..phi.n_users())
        .map(|i| {
            let row: f64 = (0..phi.n_files())
                .map(|j| p.get(i, j) * best_source(i, j, t_avg, phi).1)
                .sum();
            omega.get(i) * row
        })
        .sum()
}

/// Checks the consistency invariants between a table, its caching state and
/// the delay matrix. Returns a description of the first violation.
pub fn check_tables(t_avg: &DelayMatrix, phi: &CachingState, tables: &SourceTable) -> Result<()> {
    check_dims(t_avg, phi)?;
    for ((i, j), &src) in tables.s.indexed_iter() {
        let d = tables.d[[i, j]];
        let ok = match src.user_index() {
            None => d == t_avg.bs_delay(i) && !phi.get(i, j),
            Some(k) if k == i => d == 0.0 && phi.get(i, j),
            Some(k) => d == t_avg.get(i, k) && phi.get(k, j) && !phi.get(i, j),
        };
        if !ok || d > t_avg.bs_delay(i) {
            return Err(Error::InvalidInput(format!(
                "table entry ({i},{j}) source {src} delay {d} is inconsistent"
            )));
        }
    }
    Ok(())
}
