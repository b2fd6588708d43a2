//! Zipf popularity under the identical and independent preference models.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::PopularityMatrix;
use crate::rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopularityMode {
    /// Every user ranks the files the same way.
    Identical,
    /// Each user ranks the files with its own uniformly random permutation.
    Independent,
}

impl fmt::Display for PopularityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PopularityMode::Identical => "identical",
            PopularityMode::Independent => "independent",
        })
    }
}

impl FromStr for PopularityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identical" => Ok(PopularityMode::Identical),
            "independent" => Ok(PopularityMode::Independent),
            other => Err(Error::InvalidConfig(format!("unknown popularity mode `{other}`"))),
        }
    }
}

/// `N×M` matrix of popularity indices; each row is a permutation of `1..=M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankMatrix(pub Array2<u32>);

fn is_permutation(ranks: &[u32]) -> bool {
    let m = ranks.len();
    let mut seen = vec![false; m];
    ranks.iter().all(|&r| {
        let k = r as usize;
        (1..=m).contains(&k) && !std::mem::replace(&mut seen[k - 1], true)
    })
}

/// Zipf probabilities `rank^-β / Σ_k k^-β` for one rank permutation.
pub fn zipf_pmf(ranks: &[u32], beta: f64) -> Result<Vec<f64>> {
    if !is_permutation(ranks) {
        return Err(Error::NotAPermutation(ranks.len()));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidInput(format!("zipf beta must be >= 0, got {beta}")));
    }
    let m = ranks.len();
    let weight = |k: f64| k.powf(-beta);
    let norm: f64 = (1..=m).map(|k| weight(k as f64)).sum();
    Ok(ranks.iter().map(|&r| weight(r as f64) / norm).collect())
}

pub fn gen_ranks(mode: PopularityMode, n: usize, m: usize, seed: u64) -> RankMatrix {
    let mut rng = rng::stream(seed);
    let identity: Vec<u32> = (1..=m as u32).collect();
    let mut ranks = Array2::zeros((n, m));
    match mode {
        PopularityMode::Identical => {
            let mut shared = identity;
            shared.shuffle(&mut rng);
            for mut row in ranks.rows_mut() {
                row.assign(&ndarray::ArrayView1::from(&shared));
            }
        }
        PopularityMode::Independent => {
            for mut row in ranks.rows_mut() {
                let mut perm = identity.clone();
                perm.shuffle(&mut rng);
                row.assign(&ndarray::ArrayView1::from(&perm));
            }
        }
    }
    RankMatrix(ranks)
}

pub fn gen_popularity(
    mode: PopularityMode,
    beta: f64,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<PopularityMatrix> {
    let ranks = gen_ranks(mode, n, m, seed);
    popularity_from_ranks(&ranks, beta)
}

pub fn popularity_from_ranks(ranks: &RankMatrix, beta: f64) -> Result<PopularityMatrix> {
    let (n, m) = ranks.0.dim();
    let mut p = Array2::zeros((n, m));
    for (i, row) in ranks.0.rows().into_iter().enumerate() {
        let row: Vec<u32> = row.to_vec();
        let pmf = zipf_pmf(&row, beta)?;
        p.row_mut(i).assign(&ndarray::Array1::from(pmf));
    }
    PopularityMatrix::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn pmf_examples() {
        assert!(close(&zipf_pmf(&[3, 1, 4, 2], 0.0).unwrap(), &[0.25; 4]));
        assert!(close(&zipf_pmf(&[1, 2], 1.0).unwrap(), &[2.0 / 3.0, 1.0 / 3.0]));
        // 1/9, 1, 1/4 normalised by 1 + 1/4 + 1/9 = 49/36.
        assert!(close(
            &zipf_pmf(&[3, 1, 2], 2.0).unwrap(),
            &[4.0 / 49.0, 36.0 / 49.0, 9.0 / 49.0]
        ));
    }

    #[test]
    fn pmf_rejects_non_permutations() {
        assert!(matches!(zipf_pmf(&[1, 1], 1.0), Err(Error::NotAPermutation(2))));
        assert!(zipf_pmf(&[0, 1], 1.0).is_err());
        assert!(zipf_pmf(&[1, 3], 1.0).is_err());
    }

    #[test]
    fn popularity_examples() {
        let ranks = RankMatrix(ndarray::array![[1, 2, 3]]);
        let p = popularity_from_ranks(&ranks, 1.0).unwrap();
        assert!(close(p.row(0).as_slice().unwrap(), &[6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]));

        let p = gen_popularity(PopularityMode::Independent, 0.0, 4, 5, 1).unwrap();
        assert!(p.as_array().iter().all(|&x| (x - 0.2).abs() < 1e-15));

        let p = gen_popularity(PopularityMode::Identical, 0.7, 6, 9, 2).unwrap();
        for i in 1..6 {
            assert_eq!(p.row(0), p.row(i));
        }
    }

    #[test]
    fn ranks_are_deterministic_permutations() {
        for mode in [PopularityMode::Identical, PopularityMode::Independent] {
            let a = gen_ranks(mode, 7, 11, 99);
            assert_eq!(a, gen_ranks(mode, 7, 11, 99));
            for row in a.0.rows() {
                assert!(is_permutation(&row.to_vec()));
            }
        }
        let id = gen_ranks(PopularityMode::Identical, 5, 8, 3);
        assert!(id.0.rows().into_iter().all(|r| r == id.0.row(0)));
    }

    #[test]
    fn independent_permutations_are_uniform() {
        // 1000 rows of length 5: each of the 120 permutations should appear
        // about 1000/120 times. Per-cell 3σ binomial bound and a chi-square
        // statistic against the 119-dof critical value at α = 0.001.
        let n = 1000;
        let ranks = gen_ranks(PopularityMode::Independent, n, 5, 20240611);
        let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
        for row in ranks.0.rows() {
            *counts.entry(row.to_vec()).or_default() += 1;
        }
        let p = 1.0 / 120.0;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        let mut outside = 0;
        let observed: Vec<usize> = all_perms(5)
            .into_iter()
            .map(|perm| counts.get(&perm).copied().unwrap_or(0))
            .collect();
        assert_eq!(observed.iter().sum::<usize>(), n);
        for &c in &observed {
            chi2 += (c as f64 - mean).powi(2) / mean;
            if (c as f64 - mean).abs() > 3.0 * sigma {
                outside += 1;
            }
        }
        // 0.27% of cells are expected beyond 3σ; allow a couple of them.
        assert!(outside <= 2, "{outside} permutations outside 3 sigma");
        assert!(chi2 < 172.5, "chi-square {chi2}");
    }

    fn all_perms(m: u32) -> Vec<Vec<u32>> {
        fn rec(prefix: &mut Vec<u32>, rest: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if rest.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for k in 0..rest.len() {
                let x = rest.remove(k);
                prefix.push(x);
                rec(prefix, rest, out);
                prefix.pop();
                rest.insert(k, x);
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut (1..=m).collect(), &mut out);
        out
    }
}
