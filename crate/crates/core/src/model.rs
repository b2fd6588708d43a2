//! Shared domain types and the weighted-delay objective.
//!
//! Users are indexed `0..n` inside the crate. Wherever a node has to be
//! named (source tables, CSV output) the [`NodeId`] encoding is used: `0` is
//! the base station and `1..=n` are users.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const PROB_TOL: f64 = 1e-12;

/// Node identifier: 0 is the base station, `k + 1` is user `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const BS: NodeId = NodeId(0);

    pub fn user(index: usize) -> NodeId {
        NodeId(index as u32 + 1)
    }

    pub fn is_bs(self) -> bool {
        self.0 == 0
    }

    /// Zero-based user index, `None` for the base station.
    pub fn user_index(self) -> Option<usize> {
        self.0.checked_sub(1).map(|k| k as usize)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.user_index() {
            None => f.write_str("BS"),
            Some(k) => write!(f, "U{}", k + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UserPower {
    Shared(f64),
    PerUser(Vec<f64>),
}

impl UserPower {
    pub fn db(&self, user: usize) -> f64 {
        match self {
            UserPower::Shared(p) => *p,
            UserPower::PerUser(v) => v[user],
        }
    }

    pub fn is_uniform(&self) -> bool {
        match self {
            UserPower::Shared(_) => true,
            UserPower::PerUser(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Scalar parameters of one system.
///
/// The defaults are the normalised evaluation profile: unit bandwidth, noise
/// power and block duration, so transmit powers in dB act directly as SNR
/// scale factors and the file size is measured in those normalised bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_users: usize,
    pub n_files: usize,
    pub cache_size: usize,
    pub bandwidth_hz: f64,
    pub noise_power: f64,
    pub block_duration_s: f64,
    pub file_size_bits: f64,
    pub n_channels: usize,
    pub bs_power_db: f64,
    pub user_power_db: UserPower,
    pub cell_radius_m: f64,
    pub pathloss_exponent: f64,
    pub zipf_beta: f64,
    /// Per-user channel allocation probabilities; `None` means uniform `1/N`.
    pub channel_alloc_probs: Option<Vec<f64>>,
    pub max_blocks_cap: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_users: 25,
            n_files: 100,
            cache_size: 30,
            bandwidth_hz: 1.0,
            noise_power: 1.0,
            block_duration_s: 1.0,
            file_size_bits: 11.3,
            n_channels: 1,
            bs_power_db: 23.0,
            user_power_db: UserPower::Shared(20.0),
            cell_radius_m: 1.0,
            pathloss_exponent: 4.0,
            zipf_beta: 0.1,
            channel_alloc_probs: None,
            max_blocks_cap: 1_000_000,
        }
    }
}

impl SystemConfig {
    /// Default profile resized to `n` users, `m` files and cache size `mu`.
    pub fn with_size(n: usize, m: usize, mu: usize) -> Self {
        SystemConfig {
            n_users: n,
            n_files: m,
            cache_size: mu,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_users == 0 || self.n_files == 0 || self.n_channels == 0 {
            return bad("n_users, n_files and n_channels must be positive".into());
        }
        if self.cache_size > self.n_files {
            return bad(format!(
                "cache_size {} exceeds n_files {}",
                self.cache_size, self.n_files
            ));
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power", self.noise_power),
            ("block_duration_s", self.block_duration_s),
            ("file_size_bits", self.file_size_bits),
            ("cell_radius_m", self.cell_radius_m),
            ("pathloss_exponent", self.pathloss_exponent),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if !(self.zipf_beta.is_finite() && self.zipf_beta >= 0.0) {
            return bad(format!("zipf_beta must be non-negative, got {}", self.zipf_beta));
        }
        if self.max_blocks_cap == 0 {
            return bad("max_blocks_cap must be positive".into());
        }
        if let UserPower::PerUser(v) = &self.user_power_db {
            if v.len() != self.n_users {
                return bad(format!(
                    "user_power_db has {} entries for {} users",
                    v.len(),
                    self.n_users
                ));
            }
        }
        if let Some(p) = &self.channel_alloc_probs {
            if p.len() != self.n_users {
                return bad(format!(
                    "channel_alloc_probs has {} entries for {} users",
                    p.len(),
                    self.n_users
                ));
            }
            if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return bad("channel_alloc_probs entries must lie in [0, 1]".into());
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return bad(format!("channel_alloc_probs sums to {sum}, expected 1"));
            }
        }
        Ok(())
    }

    pub fn alloc_probs(&self) -> Vec<f64> {
        match &self.channel_alloc_probs {
            Some(p) => p.clone(),
            None => vec![1.0 / self.n_users as f64; self.n_users],
        }
    }

    /// Weights `ω_i = p̂_i`, which make the objective the system average delay.
    pub fn weights(&self) -> WeightVector {
        WeightVector(Array1::from(self.alloc_probs()))
    }
}

/// User positions around a base station.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub user_positions: Vec<[f64; 2]>,
    pub bs_position: [f64; 2],
    pub dist_user_user: Array2<f64>,
    pub dist_user_bs: Array1<f64>,
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Topology {
    pub fn from_positions(user_positions: Vec<[f64; 2]>, bs_position: [f64; 2]) -> Self {
        let n = user_positions.len();
        let dist_user_user = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                0.0
            } else {
                euclid(user_positions[i], user_positions[j])
            }
        });
        let dist_user_bs = user_positions
            .iter()
            .map(|&p| euclid(p, bs_position))
            .collect();
        Topology {
            user_positions,
            bs_position,
            dist_user_user,
            dist_user_bs,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    /// Checks that the stored distances match the positions and that every
    /// user lies inside the cell.
    pub fn validate(&self, cell_radius: f64) -> Result<()> {
        let n = self.n_users();
        if self.dist_user_user.dim() != (n, n) || self.dist_user_bs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "topology distance tables do not match {n} users"
            )));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        for i in 0..n {
            let dbs = euclid(self.user_positions[i], self.bs_position);
            if !close(dbs, self.dist_user_bs[i]) {
                return Err(Error::InvalidInput(format!("user {i}: stale BS distance")));
            }
            if dbs > cell_radius * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "user {i} at distance {dbs} lies outside the cell radius {cell_radius}"
                )));
            }
            if self.dist_user_user[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!("user {i}: non-zero self distance")));
            }
            for j in (i + 1)..n {
                let d = euclid(self.user_positions[i], self.user_positions[j]);
                if self.dist_user_user[[i, j]] != self.dist_user_user[[j, i]]
                    || !close(d, self.dist_user_user[[i, j]])
                {
                    return Err(Error::InvalidInput(format!(
                        "users {i},{j}: inconsistent distance"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Row-stochastic `N×M` request-probability matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PopularityMatrix(Array2<f64>);

impl PopularityMatrix {
    pub fn new(p: Array2<f64>) -> Result<Self> {
        for (i, row) in p.rows().into_iter().enumerate() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidInput(format!(
                    "popularity row {i} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidInput(format!(
                    "popularity row {i} sums to {sum}"
                )));
            }
        }
        Ok(PopularityMatrix(p))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(rows)?)
    }

    pub fn n_users(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_files(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Per-user weights `ω_i ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(pub(crate) Array1<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidInput("weights must lie in [0, 1]".into()));
        }
        Ok(WeightVector(Array1::from(w)))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("weights are contiguous")
    }
}

/// Expected link delays in blocks.
///
/// Row index is the receiving user, column index the transmitting user; the
/// diagonal holds each user's base-station link delay. With a shared user
/// power the matrix is symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayMatrix(Array2<f64>);

impl DelayMatrix {
    pub fn new(t: Array2<f64>) -> Result<Self> {
        if t.nrows() != t.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "delay matrix must be square, got {:?}",
                t.dim()
            )));
        }
        if t.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::InvalidInput(
                "delay matrix entries must be finite and positive".into(),
            ));
        }
        Ok(DelayMatrix(t))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(rows)?)
    }

    pub fn n_users(&self) -> usize {
        self.0.nrows()
    }

    /// Delay for user `rx` receiving from user `tx`; `rx == tx` is the BS link.
    #[inline]
    pub fn get(&self, rx: usize, tx: usize) -> f64 {
        self.0[[rx, tx]]
    }

    #[inline]
    pub fn bs_delay(&self, i: usize) -> f64 {
        self.0[[i, i]]
    }

    pub fn is_symmetric(&self) -> bool {
        self.0 == self.0.t()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Binary `N×M` placement matrix with a per-row capacity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CachingState {
    phi: Array2<bool>,
    row_fill: Vec<usize>,
    capacity: usize,
}

impl CachingState {
    pub fn empty(n: usize, m: usize, capacity: usize) -> Self {
        CachingState {
            phi: Array2::from_elem((n, m), false),
            row_fill: vec![0; n],
            capacity,
        }
    }

    pub fn from_array(phi: Array2<bool>, capacity: usize) -> Result<Self> {
        let row_fill: Vec<usize> = phi
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .collect();
        if let Some(i) = row_fill.iter().position(|&c| c > capacity) {
            return Err(Error::InvalidInput(format!(
                "user {i} caches {} files, capacity is {capacity}",
                row_fill[i]
            )));
        }
        Ok(CachingState {
            phi,
            row_fill,
            capacity,
        })
    }

    pub fn from_rows(rows: &[Vec<u8>], capacity: usize) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged caching rows".into()));
        }
        if rows.iter().flatten().any(|&b| b > 1) {
            return Err(Error::InvalidInput("caching entries must be 0 or 1".into()));
        }
        let phi = Array2::from_shape_fn((n, m), |(i, j)| rows[i][j] == 1);
        Self::from_array(phi, capacity)
    }

    pub fn n_users(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_files(&self) -> usize {
        self.phi.ncols()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.phi[[i, j]]
    }

    pub fn row_fill(&self, i: usize) -> usize {
        self.row_fill[i]
    }

    pub fn row_full(&self, i: usize) -> bool {
        self.row_fill[i] >= self.capacity
    }

    pub fn is_complete(&self) -> bool {
        self.row_fill.iter().all(|&c| c == self.capacity)
    }

    pub fn has_spare(&self) -> bool {
        self.row_fill.iter().any(|&c| c < self.capacity)
    }

    /// Caches file `j` at user `i`. Fails if the row is full or already holds `j`.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if self.phi[[i, j]] {
            return Err(Error::InvalidInput(format!("user {i} already caches file {j}")));
        }
        if self.row_full(i) {
            return Err(Error::InvalidInput(format!("user {i} cache is full")));
        }
        self.phi[[i, j]] = true;
        self.row_fill[i] += 1;
        Ok(())
    }

    /// Files cached at user `i`, in ascending order.
    pub fn files(&self, i: usize) -> Vec<usize> {
        self.phi
            .row(i)
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect()
    }

    /// Number of entries in row `i` that differ from `other`.
    pub fn row_distance(&self, other: &CachingState, i: usize) -> usize {
        self.phi
            .row(i)
            .iter()
            .zip(other.phi.row(i))
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn as_array(&self) -> &Array2<bool> {
        &self.phi
    }

    /// Row-major flattening, used for lexicographic comparison.
    pub fn lex_key(&self) -> impl Iterator<Item = bool> + '_ {
        self.phi.iter().copied()
    }
}

impl fmt::Display for CachingState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.phi.rows() {
            let line: String = row.iter().map(|&b| if b { '1' } else { '0' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Best-source table `S` and best-delay matrix `D` for a caching state.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTable {
    pub s: Array2<NodeId>,
    pub d: Array2<f64>,
}

impl SourceTable {
    /// Everyone served by the base station: `S = BS`, `D[i][j] = T[i][i]`.
    pub fn cellular(t_avg: &DelayMatrix, n_files: usize) -> Self {
        let n = t_avg.n_users();
        SourceTable {
            s: Array2::from_elem((n, n_files), NodeId::BS),
            d: Array2::from_shape_fn((n, n_files), |(i, _)| t_avg.bs_delay(i)),
        }
    }
}

fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| rows[i][j]))
}

/// Average delay of the requests generated by user `i`: `Σ_j P[i][j]·D[i][j]`.
pub fn user_avg_delay(i: usize, p: &PopularityMatrix, d: &Array2<f64>) -> Result<f64> {
    if i >= p.n_users() || i >= d.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "users",
            index: i,
            len: p.n_users().min(d.nrows()),
        });
    }
    if p.n_files() != d.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "popularity has {} files, delay matrix has {}",
            p.n_files(),
            d.ncols()
        )));
    }
    Ok(row_delay(p.row(i), d.row(i)))
}

#[inline]
pub(crate) fn row_delay(p: ArrayView1<'_, f64>, d: ArrayView1<'_, f64>) -> f64 {
    p.iter().zip(d).map(|(p, d)| p * d).sum()
}

/// Weighted average delay `η = Σ_i ω_i Σ_j P[i][j]·D[i][j]`.
pub fn weighted_delay(omega: &WeightVector, p: &PopularityMatrix, d: &Array2<f64>) -> Result<f64> {
    if omega.len() != p.n_users() || p.as_array().dim() != d.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weights {}, popularity {:?}, delays {:?}",
            omega.len(),
            p.as_array().dim(),
            d.dim()
        )));
    }
    Ok((0..omega.len())
        .map(|i| omega.get(i) * row_delay(p.row(i), d.row(i)))
        .sum())
}

/// System throughput `N_c·F/η` in bits per block.
pub fn throughput(eta: f64, cfg: &SystemConfig) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::NonPositiveDelay(eta));
    }
    Ok(cfg.n_channels as f64 * cfg.file_size_bits / eta)
}
