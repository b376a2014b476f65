//! Hierarchical candidate extraction by windowed ("integral") convolution
//! of the denoised interval histogram.

use serde::{Deserialize, Serialize};

use crate::curves::SIGMA_FLOOR;
use crate::error::{Error, Result};
use crate::model::{Model, SigmaSpec};

/// Search band and iteration limits for candidate extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub l_min: usize,
    pub l_max: usize,
    pub max_iterations: usize,
    pub max_candidates: usize,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            l_min: 5,
            l_max: 200,
            max_iterations: 5,
            max_candidates: 15,
        }
    }
}

impl CandidateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_min < 2 || self.l_min >= self.l_max {
            return Err(Error::Config(format!(
                "candidate band [{}, {}] is empty or below 2",
                self.l_min, self.l_max
            )));
        }
        if self.max_iterations == 0 || self.max_candidates == 0 {
            return Err(Error::Config(
                "max_iterations and max_candidates must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub period: usize,
    pub score: f64,
    pub iteration: usize,
}

/// Candidates in extraction order: by iteration, then by descending score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLedger {
    pub candidates: Vec<Candidate>,
    pub config: CandidateConfig,
}

impl CandidateLedger {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    /// Distinct periods in order of first appearance.
    pub fn periods(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for c in &self.candidates {
            if !seen.contains(&c.period) {
                seen.push(c.period);
            }
        }
        seen
    }

    /// Top candidate of each iteration.
    pub fn leaders(&self) -> impl Iterator<Item = &Candidate> {
        let mut last = None;
        self.candidates.iter().filter(move |c| {
            let first = last != Some(c.iteration);
            last = Some(c.iteration);
            first
        })
    }
}

/// Half-width of the convolution window for spread `sigma`:
/// `max(1, round(1.96 sigma))`.
pub fn window_half_width(sigma: f64) -> usize {
    ((1.96 * sigma.max(SIGMA_FLOOR)).round() as usize).max(1)
}

/// Inclusive window sum with out-of-range lags contributing zero.
fn window_sum(prefix: &[f64], centre: usize, half_width: usize) -> f64 {
    let max_lag = prefix.len() - 1;
    let lo = centre.saturating_sub(half_width).max(1);
    let hi = (centre + half_width).min(max_lag);
    if lo > hi {
        0.0
    } else {
        prefix[hi] - prefix[lo - 1]
    }
}

fn prefix_sums(hist: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(hist.len());
    let mut acc = 0.0;
    for (lag, v) in hist.iter().enumerate() {
        if lag > 0 {
            acc += v;
        }
        prefix.push(acc);
    }
    prefix
}

/// `tau`: histogram mass within `centre +- round(1.96 sigma)` (lag-indexed `hist`).
pub fn tau(hist: &[f64], centre: usize, sigma: f64) -> f64 {
    if hist.len() < 2 {
        return 0.0;
    }
    window_sum(&prefix_sums(hist), centre, window_half_width(sigma))
}

/// Share of the histogram explained by `period`: `(period / N_T)` times the
/// windowed mass at every multiple, with the window widening per multiple
/// for the Random Walk model.
///
/// Each window is limited to half the period so that a short candidate
/// never counts the same interval twice through overlapping windows.
pub fn explained_score(hist: &[f64], period: usize, sigma: f64, model: Model, series_length: usize) -> f64 {
    if hist.len() < 2 || period == 0 {
        return 0.0;
    }
    score_with_prefix(&prefix_sums(hist), period, sigma, model, series_length)
}

fn score_with_prefix(prefix: &[f64], period: usize, sigma: f64, model: Model, series_length: usize) -> f64 {
    let max_lag = prefix.len() - 1;
    let cap = ((period - 1) / 2).max(1);
    let mut total = 0.0;
    for i in 1..=series_length / period {
        let centre = i * period;
        let w = window_half_width(model.spread(sigma, i)).min(cap);
        if centre.saturating_sub(w) > max_lag {
            break;
        }
        total += window_sum(prefix, centre, w);
    }
    total * period as f64 / series_length as f64
}

/// Iteratively scores every period in `[l_min, l_max]`, records the best
/// `max_candidates`, and removes the intervals explained by the leader
/// before the next round. Stops early once nothing is left to explain.
pub fn extract_candidates(
    hist: &[f64],
    sigma: SigmaSpec,
    model: Model,
    series_length: usize,
    config: &CandidateConfig,
) -> Result<CandidateLedger> {
    config.validate()?;
    let mut work = hist.to_vec();
    if let Some(first) = work.first_mut() {
        *first = 0.0;
    }
    let max_lag = work.len().saturating_sub(1);
    let l_max = config.l_max.min(series_length);
    let mut candidates = Vec::new();

    for iteration in 1..=config.max_iterations {
        let remaining: f64 = work.iter().sum();
        if max_lag == 0 || remaining <= 0.0 {
            break;
        }
        let prefix = prefix_sums(&work);
        let mut scored: Vec<(usize, f64)> = (config.l_min..=l_max)
            .map(|p| {
                let s = sigma.resolve(p as f64);
                (p, score_with_prefix(&prefix, p, s, model, series_length))
            })
            .filter(|&(_, score)| score > 0.0)
            .collect();
        if scored.is_empty() {
            break;
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        candidates.extend(
            scored
                .iter()
                .take(config.max_candidates)
                .map(|&(period, score)| Candidate {
                    period,
                    score,
                    iteration,
                }),
        );

        let leader = scored[0].0;
        let leader_sigma = sigma.resolve(leader as f64);
        let mut removed = 0.0;
        let mut i = 1;
        loop {
            let centre = i * leader;
            let radius = model.spread(leader_sigma.max(SIGMA_FLOOR), i).ceil() as usize;
            let lo = centre.saturating_sub(radius).max(1);
            if lo > max_lag || i > series_length / leader {
                break;
            }
            let hi = (centre + radius).min(max_lag);
            for slot in &mut work[lo..=hi] {
                removed += *slot;
                *slot = 0.0;
            }
            i += 1;
        }
        if removed <= 0.0 {
            break;
        }
    }

    Ok(CandidateLedger {
        candidates,
        config: *config,
    })
}
