//! Percentile bootstrap over documents.

use super::{EvalPair, MetricsError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile interval of `statistic` over documents resampled with
/// replacement.
///
/// Resample `b` draws from its own ChaCha stream keyed by `(seed, b)`, so the
/// result does not depend on how resamples are scheduled across threads.
pub fn bootstrap_ci<F>(
    pairs: &[EvalPair],
    statistic: F,
    cfg: &BootstrapConfig,
) -> Result<Interval, MetricsError>
where
    F: Fn(&[&EvalPair]) -> f64 + Sync,
{
    if cfg.resamples == 0 {
        return Err(MetricsError::NoResamples);
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(MetricsError::InvalidLevel(cfg.level));
    }
    let n = pairs.len();
    let mut stats: Vec<f64> = (0..cfg.resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let sample: Vec<&EvalPair> = (0..n).map(|_| &pairs[rng.gen_range(0..n)]).collect();
            statistic(&sample)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.level) / 2.0;
    Ok(Interval {
        low: quantile(&stats, tail),
        high: quantile(&stats, 1.0 - tail),
    })
}
