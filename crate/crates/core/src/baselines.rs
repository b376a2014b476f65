//! Comparison detectors: periodogram, autocorrelation spectrum, histogram
//! spectrum and a multiple-coverage ("E-periodicity" style) scan.
//!
//! Each returns exactly `k` periods inside `[min_period, max_period]`.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::IntervalHistogram;
use crate::series::EventSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Fft,
    Acf,
    Hist,
    #[serde(rename = "eperiodicity")]
    EPeriodicity,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Fft, Baseline::Acf, Baseline::Hist, Baseline::EPeriodicity];

    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::Fft => "fft",
            Baseline::Acf => "acf",
            Baseline::Hist => "hist",
            Baseline::EPeriodicity => "eperiodicity",
        }
    }

    pub fn detect(self, series: &EventSeries, k: usize, config: &BaselineConfig) -> Result<BaselineResult> {
        match self {
            Baseline::Fft => fft_detect(series, k, config),
            Baseline::Acf => acf_fft_detect(series, k, config),
            Baseline::Hist => hist_fft_detect(series, k, config),
            Baseline::EPeriodicity => eperiodicity_detect(series, k, config),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fft" => Ok(Baseline::Fft),
            "acf" => Ok(Baseline::Acf),
            "hist" => Ok(Baseline::Hist),
            "eperiodicity" | "e-periodicity" => Ok(Baseline::EPeriodicity),
            other => Err(Error::Parameter(format!("unknown baseline '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub min_period: f64,
    pub max_period: f64,
    /// Histogram range for the histogram spectrum.
    pub loss_length: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            min_period: 10.0,
            max_period: 350.0,
            loss_length: 400,
        }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<()> {
        if !(self.min_period >= 2.0 && self.min_period <= self.max_period) {
            return Err(Error::Config(format!(
                "period band [{}, {}] is invalid",
                self.min_period, self.max_period
            )));
        }
        if self.loss_length < 2 {
            return Err(Error::Config("loss_length must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub method: Baseline,
    pub periods: Vec<f64>,
    pub scores: Vec<f64>,
}

fn check(series: &EventSeries, k: usize, config: &BaselineConfig) -> Result<()> {
    config.validate()?;
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    if series.len() < 2 {
        return Err(Error::TooFewEvents {
            found: series.len(),
            required: 2,
        });
    }
    Ok(())
}

/// Zero-padded transform length: fine enough that long periods resolve to
/// well under a tick.
fn padded_len(n: usize) -> usize {
    (4 * n).max(8192).next_power_of_two()
}

/// `|FFT(x)|^2 / len(x)` of the mean-removed signal zero-padded to `len`,
/// bins `0..=len/2`.
fn power_spectrum(signal: &[f64], len: usize) -> Vec<f64> {
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let norm = signal.len() as f64;
    buf[..=len / 2].iter().map(|c| c.norm_sqr() / norm).collect()
}

/// Picks the `k` strongest local maxima whose period `len / bin` lies in the
/// band, then pads with the strongest remaining in-band bins. Ties prefer the
/// lower frequency.
fn pick_spectral_peaks(power: &[f64], len: usize, k: usize, config: &BaselineConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let lo = ((len as f64 / config.max_period).ceil() as usize).max(1);
    let hi = ((len as f64 / config.min_period).floor() as usize).min(power.len() - 1);
    if lo > hi {
        return Err(Error::Degenerate("no frequency bins inside the period band".into()));
    }
    let is_peak = |f: usize| {
        let left = if f > 0 { power[f - 1] } else { f64::NEG_INFINITY };
        let right = power.get(f + 1).copied().unwrap_or(f64::NEG_INFINITY);
        power[f] > left && power[f] >= right
    };
    let mut bins: Vec<(usize, bool)> = (lo..=hi).map(|f| (f, is_peak(f))).collect();
    bins.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(power[b.0].total_cmp(&power[a.0]))
            .then(a.0.cmp(&b.0))
    });
    let chosen: Vec<usize> = bins.iter().take(k).map(|b| b.0).collect();
    if chosen.len() < k {
        return Err(Error::Degenerate(format!(
            "only {} frequency bins in the band",
            chosen.len()
        )));
    }
    Ok((
        chosen.iter().map(|&f| len as f64 / f as f64).collect(),
        chosen.iter().map(|&f| power[f]).collect(),
    ))
}

/// Indicator of events over the observed span `[first, last]`.
fn observed_indicator(series: &EventSeries) -> Vec<f64> {
    let ts = series.timestamps();
    let (first, last) = (ts[0], ts[ts.len() - 1]);
    let mut x = vec![0.0; last - first + 1];
    for &t in ts {
        x[t - first] = 1.0;
    }
    x
}

/// Periodogram of the binary series, single full-length window.
pub fn fft_detect(series: &EventSeries, k: usize, config: &BaselineConfig) -> Result<BaselineResult> {
    check(series, k, config)?;
    let x = observed_indicator(series);
    let len = padded_len(x.len());
    let (periods, scores) = pick_spectral_peaks(&power_spectrum(&x, len), len, k, config)?;
    Ok(BaselineResult {
        method: Baseline::Fft,
        periods,
        scores,
    })
}

/// Biased autocorrelation (divided by the series length) of the mean-removed
/// binary series for lags `0..n`, computed through a zero-padded transform.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (len as f64 * n as f64)).collect()
}

/// Spectrum of the autocorrelation function.
pub fn acf_fft_detect(series: &EventSeries, k: usize, config: &BaselineConfig) -> Result<BaselineResult> {
    check(series, k, config)?;
    let acf = autocorrelation(&observed_indicator(series));
    let len = padded_len(acf.len());
    let (periods, scores) = pick_spectral_peaks(&power_spectrum(&acf, len), len, k, config)?;
    Ok(BaselineResult {
        method: Baseline::Acf,
        periods,
        scores,
    })
}

/// Spectrum of the interval histogram `D(1..=loss_length)`.
pub fn hist_fft_detect(series: &EventSeries, k: usize, config: &BaselineConfig) -> Result<BaselineResult> {
    check(series, k, config)?;
    let max_lag = config.loss_length.min(series.length());
    let hist = IntervalHistogram::from_series(series, max_lag)?;
    if hist.total_pairs() == 0 {
        return Err(Error::Degenerate("no intervals within the histogram range".into()));
    }
    let d: Vec<f64> = hist.counts()[1..].iter().map(|&c| c as f64).collect();
    let len = padded_len(d.len());
    let (periods, scores) = pick_spectral_peaks(&power_spectrum(&d, len), len, k, config)?;
    Ok(BaselineResult {
        method: Baseline::Hist,
        periods,
        scores,
    })
}

/// Scans integer periods `q` in the band. A pair of events supports `q` when
/// their distance is within one tick of a positive multiple of `q`; the
/// score is the supporting share of all pairs minus `3 / q`, the share a
/// structureless interval distribution would give. Ties prefer smaller `q`.
pub fn eperiodicity_detect(series: &EventSeries, k: usize, config: &BaselineConfig) -> Result<BaselineResult> {
    check(series, k, config)?;
    let hist = IntervalHistogram::from_series(series, series.length())?;
    let counts = hist.counts();
    let total = hist.total_pairs() as f64;
    let max_lag = hist.max_lag();
    let lo = config.min_period.ceil() as usize;
    let hi = (config.max_period.floor() as usize).min(max_lag);
    if lo > hi {
        return Err(Error::Degenerate("period band exceeds the series length".into()));
    }
    let mut scored: Vec<(usize, f64)> = (lo..=hi)
        .map(|q| {
            let mut support = 0u64;
            let mut centre = q;
            while centre - 1 <= max_lag {
                support += counts[centre - 1..=(centre + 1).min(max_lag)].iter().sum::<u64>();
                centre += q;
            }
            (q, support as f64 / total - 3.0 / q as f64)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if scored.len() < k {
        return Err(Error::Degenerate(format!("only {} periods in the band", scored.len())));
    }
    scored.truncate(k);
    Ok(BaselineResult {
        method: Baseline::EPeriodicity,
        periods: scored.iter().map(|s| s.0 as f64).collect(),
        scores: scored.iter().map(|s| s.1).collect(),
    })
}
