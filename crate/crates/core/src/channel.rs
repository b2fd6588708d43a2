//! Rayleigh block fading and Monte Carlo estimation of per-link file
//! transfer delays.
//!
//! The fading power `z` is constant within a block and redrawn i.i.d. for
//! every block. A file of `F` bits is delivered after the first block `t`
//! at which the accumulated `Σ T₀·C[k]` reaches `F`, with
//! `C[k] = B·log₂(1 + P_t·z_k/(B·σ²))`.

use ndarray::Array2;
use rand::Rng;

use crate::model::{db_to_linear, DelayMatrix, SystemConfig, Topology};
use crate::{par, rng, Error, Result};

/// Relative slack when comparing delivered bits against the file size, so
/// that `k` blocks of exactly `F/k` bits count as a complete delivery.
const DELIVERY_RTOL: f64 = 1e-12;

/// How the per-block fading power is drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FadingModel {
    /// Exponential power with mean `d^-α`.
    Rayleigh,
    /// Constant power in every block; used for deterministic channels.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkParams {
    pub tx_power_linear: f64,
    pub distance_m: f64,
    pub pathloss_exponent: f64,
    pub bandwidth_hz: f64,
    pub noise_power: f64,
    pub block_duration_s: f64,
    pub file_size_bits: f64,
    pub max_blocks_cap: u64,
    pub fading: FadingModel,
}

impl LinkParams {
    /// Rayleigh link with the physical constants of `cfg`.
    pub fn from_config(cfg: &SystemConfig, tx_power_db: f64, distance_m: f64) -> Self {
        LinkParams {
            tx_power_linear: db_to_linear(tx_power_db),
            distance_m,
            pathloss_exponent: cfg.pathloss_exponent,
            bandwidth_hz: cfg.bandwidth_hz,
            noise_power: cfg.noise_power,
            block_duration_s: cfg.block_duration_s,
            file_size_bits: cfg.file_size_bits,
            max_blocks_cap: cfg.max_blocks_cap,
            fading: FadingModel::Rayleigh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tx_power_linear", self.tx_power_linear),
            ("distance_m", self.distance_m),
            ("pathloss_exponent", self.pathloss_exponent),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power", self.noise_power),
            ("block_duration_s", self.block_duration_s),
            ("file_size_bits", self.file_size_bits),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "link {name} must be finite and positive, got {v}"
                )));
            }
        }
        if let FadingModel::Fixed(z) = self.fading {
            if !(z.is_finite() && z >= 0.0) {
                return Err(Error::InvalidInput(format!("fixed fading power {z}")));
            }
        }
        if self.max_blocks_cap == 0 {
            return Err(Error::InvalidInput("max_blocks_cap must be positive".into()));
        }
        Ok(())
    }

    fn mean_gain(&self) -> f64 {
        self.distance_m.powf(-self.pathloss_exponent)
    }

    fn draw_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.fading {
            FadingModel::Rayleigh => exponential(self.mean_gain(), rng.random()),
            FadingModel::Fixed(z) => z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayEstimate {
    pub mean_blocks: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Inverse CDF of the exponential distribution, `u ∈ [0, 1)`.
#[inline]
fn exponential(mean: f64, u: f64) -> f64 {
    -mean * (-u).ln_1p()
}

/// Fading power for one block at `distance_m`.
pub fn sample_fading<R: Rng + ?Sized>(distance_m: f64, pathloss_exponent: f64, rng: &mut R) -> f64 {
    exponential(distance_m.powf(-pathloss_exponent), rng.random())
}

/// Instantaneous capacity in bits/s for fading power `z`.
pub fn block_capacity(link: &LinkParams, z: f64) -> f64 {
    let snr = link.tx_power_linear * z / (link.bandwidth_hz * link.noise_power);
    link.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

/// Number of blocks needed to deliver one file, or `None` if the cap was hit.
pub fn sample_transmission_blocks<R: Rng + ?Sized>(link: &LinkParams, rng: &mut R) -> Option<u64> {
    let target = link.file_size_bits * (1.0 - DELIVERY_RTOL);
    let mut delivered = 0.0;
    for t in 1..=link.max_blocks_cap {
        delivered += link.block_duration_s * block_capacity(link, link.draw_gain(rng));
        if delivered >= target {
            return Some(t);
        }
    }
    None
}

/// Mean and standard error of `n_samples` independent transfer delays.
pub fn estimate_avg_delay(link: &LinkParams, n_samples: usize, seed: u64) -> Result<DelayEstimate> {
    link.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be positive".into()));
    }
    let mut rng = rng::stream(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut capped = 0;
    for _ in 0..n_samples {
        match sample_transmission_blocks(link, &mut rng) {
            Some(t) => {
                let t = t as f64;
                sum += t;
                sum_sq += t * t;
            }
            None => capped += 1,
        }
    }
    if capped > 0 {
        return Err(Error::CappedSamples {
            capped,
            n_samples,
            cap: link.max_blocks_cap,
            tx_power: link.tx_power_linear,
            distance: link.distance_m,
        });
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let std_error = if n_samples > 1 {
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(DelayEstimate {
        mean_blocks: mean,
        std_error,
        n_samples,
    })
}

/// Estimates the full `N×N` expected-delay table for a topology.
///
/// Entry `(i, j)` draws from its own sub-stream of `seed`, so the table does
/// not depend on evaluation order or thread count. With a shared user power
/// only the upper triangle is estimated and mirrored.
pub fn build_delay_table(
    topology: &Topology,
    cfg: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<DelayMatrix> {
    cfg.validate()?;
    let n = topology.n_users();
    if n != cfg.n_users {
        return Err(Error::DimensionMismatch(format!(
            "topology has {n} users, config has {}",
            cfg.n_users
        )));
    }
    let symmetric = cfg.user_power_db.is_uniform();
    let links: Vec<(usize, usize)> = (0..n)
        .flat_map(|rx| {
            let start = if symmetric { rx } else { 0 };
            (start..n).map(move |tx| (rx, tx))
        })
        .collect();

    let estimates = par::map_slice(&links, |&(rx, tx)| {
        let link = if rx == tx {
            LinkParams::from_config(cfg, cfg.bs_power_db, topology.dist_user_bs[rx])
        } else {
            LinkParams::from_config(cfg, cfg.user_power_db.db(tx), topology.dist_user_user[[rx, tx]])
        };
        estimate_avg_delay(&link, n_samples, rng::mix(seed, &[rx as u64, tx as u64]))
    });

    let mut t = Array2::zeros((n, n));
    for (&(rx, tx), est) in links.iter().zip(estimates) {
        let mean = est?.mean_blocks;
        t[[rx, tx]] = mean;
        if symmetric {
            t[[tx, rx]] = mean;
        }
    }
    DelayMatrix::new(t)
}
