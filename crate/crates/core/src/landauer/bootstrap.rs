use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_FAILED_FRACTION: f64 = 0.05;
const STREAM_TAG: u64 = 0x6f6f_7473_7472_6170;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSettings {
    pub n_resamples: usize,
    /// Central coverage of the percentile interval.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            n_resamples: 999,
            alpha: 0.68,
            seed: 0,
        }
    }
}

impl BootstrapSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Validation(format!(
                "bootstrap alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Percentile interval of one scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub low: f64,
    pub high: f64,
    pub n_resamples: usize,
    pub n_failed: usize,
    pub seed: u64,
}

impl BootstrapResult {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let i = h.floor() as usize;
            let j = (i + 1).min(n - 1);
            sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
        }
    }
}

/// Resample shot rows with replacement, independently per hold time, and
/// evaluate `statistic` on each resample. Resamples that fail, or return a
/// vector of a different length, are dropped and counted.
pub fn bootstrap<F>(shots: &[DMatrix<f64>], settings: &BootstrapSettings, statistic: F) -> Result<Vec<BootstrapResult>>
where
    F: Fn(&[DMatrix<f64>]) -> Result<Vec<f64>> + Sync,
{
    settings.validate()?;
    if shots.iter().any(|s| s.nrows() < 2) {
        return Err(Error::Validation(
            "bootstrap needs at least 2 shots per hold time".into(),
        ));
    }
    let point = statistic(shots)?;
    let n_times = shots.len() as u64;
    let samples: Vec<Option<Vec<f64>>> = (0..settings.n_resamples)
        .into_par_iter()
        .map(|r| {
            let resampled: Vec<DMatrix<f64>> = shots
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ STREAM_TAG);
                    rng.set_stream(r as u64 * n_times + j as u64);
                    let n = s.nrows();
                    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    s.select_rows(rows.iter())
                })
                .collect();
            statistic(&resampled).ok().filter(|v| v.len() == point.len())
        })
        .collect();
    let good: Vec<&Vec<f64>> = samples.iter().flatten().collect();
    let failed = settings.n_resamples - good.len();
    if failed as f64 > MAX_FAILED_FRACTION * settings.n_resamples as f64 {
        return Err(Error::TooManyFailedResamples {
            failed,
            total: settings.n_resamples,
        });
    }
    if failed > 0 {
        log::warn!(
            "{failed} of {} bootstrap resamples failed and were dropped",
            settings.n_resamples
        );
    }
    let (ql, qh) = ((1.0 - settings.alpha) / 2.0, (1.0 + settings.alpha) / 2.0);
    Ok(point
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut col: Vec<f64> = good.iter().map(|v| v[i]).collect();
            col.sort_by(f64::total_cmp);
            let (low, high) = if col.is_empty() {
                (p, p)
            } else {
                (percentile(&col, ql), percentile(&col, qh))
            };
            BootstrapResult {
                point: p,
                low,
                high,
                n_resamples: settings.n_resamples,
                n_failed: failed,
                seed: settings.seed,
            }
        })
        .collect())
}
