//! All-pairs forward interval histogram `D(mu)` and the uniform
//! interaction-interval model `E[zeta(mu)] = z * (1 - mu / N_T)`.
//!
//! Lag-indexed vectors in this crate use the lag itself as the index, so
//! entry 0 is always zero and entry `mu` holds the value at lag `mu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::EventSeries;

/// Counts of forward inter-event intervals of every order, for lags `1..=max_lag`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalHistogram {
    counts: Vec<u64>,
    series_length: usize,
    total_pairs: u64,
    degenerate: bool,
}

impl IntervalHistogram {
    /// Builds `D(mu)` for `mu <= max_lag`. Fewer than two events give an
    /// all-zero histogram flagged as degenerate.
    pub fn from_series(series: &EventSeries, max_lag: usize) -> Result<Self> {
        if max_lag == 0 || max_lag > series.length() {
            return Err(Error::Config(format!(
                "max lag {max_lag} outside [1, {}]",
                series.length()
            )));
        }
        let ts = series.timestamps();
        let mut counts = vec![0u64; max_lag + 1];
        let mut total_pairs = 0;
        for (i, &start) in ts.iter().enumerate() {
            for &end in &ts[i + 1..] {
                let lag = end - start;
                if lag > max_lag {
                    break;
                }
                counts[lag] += 1;
                total_pairs += 1;
            }
        }
        Ok(Self {
            counts,
            series_length: series.length(),
            total_pairs,
            degenerate: ts.len() < 2,
        })
    }

    /// Wraps precomputed lag counts (`counts[0]` is ignored).
    pub fn from_counts(mut counts: Vec<u64>, series_length: usize) -> Result<Self> {
        if counts.len() < 2 || counts.len() - 1 > series_length {
            return Err(Error::Config("histogram must cover lags 1..=max_lag <= N_T".into()));
        }
        counts[0] = 0;
        let total_pairs = counts.iter().sum();
        Ok(Self {
            counts,
            series_length,
            total_pairs,
            degenerate: total_pairs == 0,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn series_length(&self) -> usize {
        self.series_length
    }

    /// `D(mu)`; zero outside `1..=max_lag`.
    pub fn count(&self, lag: usize) -> u64 {
        if lag == 0 {
            0
        } else {
            self.counts.get(lag).copied().unwrap_or(0)
        }
    }

    /// Lag-indexed counts (entry 0 is zero).
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    /// Set when the series had fewer than two events.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Sum of `D(mu)` over `1..=upto`.
    pub fn mass(&self, upto: usize) -> u64 {
        self.counts[1..=upto.min(self.max_lag())].iter().sum()
    }
}

/// Linear interaction-interval model `E[zeta(mu)] = z_hat * (1 - mu / N_T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub z_hat: f64,
    pub series_length: usize,
}

impl NoiseModel {
    /// Expected interaction intervals at `lag`; zero beyond `N_T`.
    pub fn expected(&self, lag: usize) -> f64 {
        let n = self.series_length as f64;
        (self.z_hat * (1.0 - lag as f64 / n)).max(0.0)
    }

    /// Expected forward-interval model for `n` independent uniform events:
    /// `z = (n^2 - n) / N_T`.
    ///
    /// Every unordered pair contributes its absolute difference once, so this
    /// is twice the constant obtained from the signed difference of two draws,
    /// `(n^2 - n) / (2 N_T)` (see [`NoiseModel::signed_pairs`]).
    pub fn uniform(events: usize, series_length: usize) -> Self {
        let n = events as f64;
        Self {
            z_hat: (n * n - n) / series_length as f64,
            series_length,
        }
    }

    /// `z = (n^2 - n) / (2 N_T)`: the signed-difference constant. It matches
    /// interval counts taken in draw order, not over the sorted timestamp set.
    pub fn signed_pairs(events: usize, series_length: usize) -> Self {
        let n = events as f64;
        Self {
            z_hat: (n * n - n) / (2.0 * series_length as f64),
            series_length,
        }
    }
}

/// `z_hat = mean(D(1..=z_min))`: short lags are assumed to carry only
/// interaction intervals.
pub fn estimate_z_hat(hist: &IntervalHistogram, z_min: usize) -> Result<NoiseModel> {
    if z_min == 0 || z_min > hist.max_lag() {
        return Err(Error::Config(format!(
            "noise range {z_min} outside [1, {}]",
            hist.max_lag()
        )));
    }
    let z_hat = hist.mass(z_min) as f64 / z_min as f64;
    Ok(NoiseModel {
        z_hat,
        series_length: hist.series_length(),
    })
}

/// `max(0, D(mu) - E[zeta(mu)])` as a lag-indexed vector. Clamped; feeds
/// candidate extraction and the variance fit.
pub fn denoised_histogram(hist: &IntervalHistogram, noise: &NoiseModel) -> Vec<f64> {
    let mut out = vec![0.0; hist.max_lag() + 1];
    for (lag, slot) in out.iter_mut().enumerate().skip(1) {
        *slot = (hist.count(lag) as f64 - noise.expected(lag)).max(0.0);
    }
    out
}
