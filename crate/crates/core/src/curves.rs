//! Expected interval curves `G_M` for the Clock and Random Walk models.
//!
//! For a period `mu_p` with spread `sigma_p`, the curve puts a scaled
//! Gaussian at every multiple `m * mu_p`:
//!
//! ```text
//! G_M(mu) = sum_p sum_m c_pm * N(mu; m * mu_p, s_m^2)
//! ```
//!
//! where `s_m = sigma_p` for the Clock model and `m * sigma_p` for the Random
//! Walk model, and `c_pm = N_T(mu_p) / mu_p - (m - 1)` counts the possible
//! `m`-th order intervals on the covered part of the series.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::series::EventSeries;

/// Smallest spread used anywhere a Gaussian is evaluated, in ticks.
pub const SIGMA_FLOOR: f64 = 0.5;

/// Multiples further than this many spreads from a lag are skipped.
const TAIL_CUTOFF: f64 = 12.0;

/// Total length of the series on which events were actually observed.
///
/// `covered_length(t)` sums the consecutive-event gaps shorter than `t`, so
/// long silent stretches do not inflate the expected interval counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    sorted_gaps: Vec<usize>,
    prefix: Vec<u64>,
    series_length: usize,
    full: bool,
}

impl Coverage {
    pub fn from_series(series: &EventSeries) -> Self {
        let mut sorted_gaps: Vec<usize> = series.first_order_intervals().collect();
        sorted_gaps.sort_unstable();
        let mut prefix = Vec::with_capacity(sorted_gaps.len() + 1);
        prefix.push(0u64);
        let mut acc = 0u64;
        for &g in &sorted_gaps {
            acc += g as u64;
            prefix.push(acc);
        }
        Self {
            sorted_gaps,
            prefix,
            series_length: series.length(),
            full: false,
        }
    }

    /// Coverage of a gap-free series: always `N_T`.
    pub fn full(series_length: usize) -> Self {
        Self {
            sorted_gaps: Vec::new(),
            prefix: vec![0],
            series_length,
            full: true,
        }
    }

    pub fn series_length(&self) -> usize {
        self.series_length
    }

    /// Sum of consecutive gaps strictly smaller than `threshold`.
    pub fn covered_length(&self, threshold: f64) -> f64 {
        if self.full {
            return self.series_length as f64;
        }
        let k = self.sorted_gaps.partition_point(|&g| (g as f64) < threshold);
        self.prefix[k] as f64
    }
}

/// `c_pm = N_T(mu) / mu - (m - 1)` with `N_T(mu)` the covered length for
/// gaps below `mu + 2 sigma`; floored at zero.
pub fn adjusted_scale(period: f64, sigma: f64, multiple: usize, coverage: &Coverage) -> f64 {
    let covered = coverage.covered_length(period + 2.0 * sigma);
    (covered / period - (multiple as f64 - 1.0)).max(0.0)
}

/// A period set evaluated under one model over lags `1..=max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub model: Model,
    pub periods: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub series_length: usize,
    pub max_lag: usize,
}

impl CurveParams {
    pub fn new(model: Model, periods: Vec<f64>, sigmas: Vec<f64>, series_length: usize, max_lag: usize) -> Self {
        assert_eq!(periods.len(), sigmas.len(), "one sigma per period");
        Self {
            model,
            periods,
            sigmas,
            series_length,
            max_lag,
        }
    }

    /// `G_M(lag)`.
    pub fn evaluate(&self, coverage: &Coverage, lag: f64) -> f64 {
        self.periods
            .iter()
            .zip(&self.sigmas)
            .map(|(&mu, &sigma)| {
                let scale = coverage.covered_length(mu + 2.0 * sigma) / mu;
                mixture_at(mu, sigma, scale, self.multiples(mu), lag, |s, m| {
                    self.model.spread(s, m)
                })
            })
            .sum()
    }

    /// Lag-indexed curve over `0..=max_lag` (entry 0 is zero).
    pub fn curve(&self, coverage: &Coverage) -> Vec<f64> {
        let mut out = vec![0.0; self.max_lag + 1];
        for (&mu, &sigma) in self.periods.iter().zip(&self.sigmas) {
            add_component(&mut out, self.model, mu, sigma, coverage, self.series_length);
        }
        out
    }

    /// Highest multiple evaluated for `period`: all multiples that fit in the
    /// series, capped a little past the evaluation range.
    pub fn multiples(&self, period: f64) -> usize {
        multiple_limit(period, self.series_length, self.max_lag)
    }
}

pub(crate) fn multiple_limit(period: f64, series_length: usize, max_lag: usize) -> usize {
    let fits = (series_length as f64 / period).floor() as usize;
    let range = (max_lag as f64 / period).ceil() as usize + 2;
    fits.min(range)
}

#[inline]
fn gaussian(x: f64, centre: f64, spread: f64) -> f64 {
    let z = (x - centre) / spread;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * spread)
}

/// One period's mixture at `lag`, with the per-multiple spread supplied by
/// `spread(sigma, m)`.
fn mixture_at<F>(period: f64, sigma: f64, scale: f64, multiples: usize, lag: f64, spread: F) -> f64
where
    F: Fn(f64, usize) -> f64,
{
    let sigma = sigma.max(SIGMA_FLOOR);
    (1..=multiples)
        .map(|m| {
            let c = (scale - (m as f64 - 1.0)).max(0.0);
            if c == 0.0 {
                0.0
            } else {
                c * gaussian(lag, m as f64 * period, spread(sigma, m))
            }
        })
        .sum()
}

/// Adds one period's mixture to a lag-indexed curve. Returns nothing; the
/// caller owns the buffer so several periods can be summed in place.
pub fn add_component(
    out: &mut [f64],
    model: Model,
    period: f64,
    sigma: f64,
    coverage: &Coverage,
    series_length: usize,
) {
    let max_lag = out.len().saturating_sub(1);
    if max_lag == 0 {
        return;
    }
    let scale = coverage.covered_length(period + 2.0 * sigma) / period;
    let sigma = sigma.max(SIGMA_FLOOR);
    for m in 1..=multiple_limit(period, series_length, max_lag) {
        let c = scale - (m as f64 - 1.0);
        if c <= 0.0 {
            break;
        }
        let centre = m as f64 * period;
        let spread = model.spread(sigma, m);
        let lo = ((centre - TAIL_CUTOFF * spread).floor().max(1.0)) as usize;
        let hi = ((centre + TAIL_CUTOFF * spread).ceil().min(max_lag as f64)) as usize;
        for (lag, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *slot += c * gaussian(lag as f64, centre, spread);
        }
    }
}

/// Derivative of one period's mixture with respect to its `sigma`, with the
/// coverage held fixed. Lag-indexed like [`add_component`].
pub(crate) fn component_sigma_gradient(
    out: &mut [f64],
    model: Model,
    period: f64,
    sigma: f64,
    coverage: &Coverage,
    series_length: usize,
) {
    let max_lag = out.len().saturating_sub(1);
    let scale = coverage.covered_length(period + 2.0 * sigma) / period;
    let sigma = sigma.max(SIGMA_FLOOR);
    for m in 1..=multiple_limit(period, series_length, max_lag) {
        let c = scale - (m as f64 - 1.0);
        if c <= 0.0 {
            break;
        }
        let centre = m as f64 * period;
        let spread = model.spread(sigma, m);
        let dspread = match model {
            Model::Clock => 1.0,
            Model::RandomWalk => m as f64,
        };
        let lo = ((centre - TAIL_CUTOFF * spread).floor().max(1.0)) as usize;
        let hi = ((centre + TAIL_CUTOFF * spread).ceil().min(max_lag as f64)) as usize;
        for (lag, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = lag as f64 - centre;
            let term = c * gaussian(lag as f64, centre, spread);
            *slot += term * (d * d / spread.powi(3) - 1.0 / spread) * dspread;
        }
    }
}

/// `G_C(lag)` for the given periods.
pub fn g_clock(params: &CurveParams, coverage: &Coverage, lag: f64) -> f64 {
    CurveParams {
        model: Model::Clock,
        ..params.clone()
    }
    .evaluate(coverage, lag)
}

/// `G_RW(lag)` for the given periods.
pub fn g_random_walk(params: &CurveParams, coverage: &Coverage, lag: f64) -> f64 {
    CurveParams {
        model: Model::RandomWalk,
        ..params.clone()
    }
    .evaluate(coverage, lag)
}
