//! Accuracy sweeps over synthetic suites, timing, and reference-loss
//! calibration on noise-only series.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{Baseline, BaselineConfig};
use crate::detect::{detect, DetectConfig};
use crate::error::{Error, Result};
use crate::generator::{derive_seed, uniform_series, CellKey, TestCase};
use crate::model::SigmaSpec;
use crate::series::EventSeries;

/// Initial spread when the generating spread is treated as unknown.
pub const UNKNOWN_SIGMA_INIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Detector {
    Gmpda,
    Baseline(Baseline),
}

impl Detector {
    pub fn all() -> Vec<Detector> {
        std::iter::once(Detector::Gmpda)
            .chain(Baseline::ALL.into_iter().map(Detector::Baseline))
            .collect()
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Detector::Gmpda => f.write_str("gmpda"),
            Detector::Baseline(b) => b.fmt(f),
        }
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("gmpda") {
            Ok(Detector::Gmpda)
        } else {
            s.parse().map(Detector::Baseline)
        }
    }
}

impl TryFrom<String> for Detector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Detector> for String {
    fn from(d: Detector) -> String {
        d.to_string()
    }
}

/// Greedy nearest matching of estimates to true periods. A truth is hit when
/// an unused estimate lies within `mu_p +- 0.5 sigma_p`; closest pairs are
/// matched first. Returns the accuracy and a hit flag per truth.
pub fn score(estimates: &[f64], truth: &[f64], sigmas: &[f64]) -> (f64, Vec<bool>) {
    assert_eq!(truth.len(), sigmas.len(), "one sigma per true period");
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, (&mu, &s)) in truth.iter().zip(sigmas).enumerate() {
        for (j, &e) in estimates.iter().enumerate() {
            let d = (e - mu).abs();
            if d <= 0.5 * s {
                pairs.push((d, i, j));
            }
        }
    }
    // Ordering by values (not positions) keeps the result permutation-free.
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(truth[a.1].total_cmp(&truth[b.1]))
            .then(estimates[a.2].total_cmp(&estimates[b.2]))
    });
    let mut hits = vec![false; truth.len()];
    let mut used = vec![false; estimates.len()];
    for (_, i, j) in pairs {
        if !hits[i] && !used[j] {
            hits[i] = true;
            used[j] = true;
        }
    }
    let accuracy = if truth.is_empty() {
        0.0
    } else {
        hits.iter().filter(|h| **h).count() as f64 / truth.len() as f64
    };
    (accuracy, hits)
}

/// Mean and 95% half-width `1.96 * SEM` (sample standard deviation).
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Type-7 (linear interpolation) sample quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "quantile level {q} outside [0, 1]");
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub detectors: Vec<Detector>,
    /// Template for GMPDA runs; the model comes from each case and
    /// `max_periods` from `extra_periods`.
    pub gmpda: DetectConfig,
    /// Initialize GMPDA with the generating spread spec instead of a fixed guess.
    pub sigma_known: bool,
    /// GMPDA searches up to `|mu*| + extra_periods` periods.
    pub extra_periods: usize,
    pub baseline: BaselineConfig,
    /// Timed executions per case and detector.
    pub repeats: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            detectors: Detector::all(),
            gmpda: DetectConfig {
                l_max: 350,
                curve_fit: false,
                ..DetectConfig::default()
            },
            sigma_known: true,
            extra_periods: 2,
            baseline: BaselineConfig::default(),
            repeats: 1,
        }
    }
}

impl SweepConfig {
    /// The GMPDA configuration used for one case.
    pub fn gmpda_config(&self, case: &TestCase) -> DetectConfig {
        DetectConfig {
            model: case.cell.model,
            max_periods: case.cell.period_count + self.extra_periods,
            sigma: if self.sigma_known {
                case.cell.sigma
            } else {
                SigmaSpec::Fixed(UNKNOWN_SIGMA_INIT)
            },
            ..self.gmpda.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub cell: CellKey,
    pub case: usize,
    pub seed: u64,
    pub truth: Vec<usize>,
    pub truth_sigmas: Vec<f64>,
    pub detector: Detector,
    pub estimates: Vec<f64>,
    pub hits: Vec<bool>,
    pub accuracy: f64,
    /// Mean wall time of one detection.
    pub seconds: f64,
    pub error: Option<String>,
}

fn run_detector(detector: Detector, series: &EventSeries, case: &TestCase, config: &SweepConfig) -> Result<Vec<f64>> {
    match detector {
        Detector::Gmpda => detect(series, &config.gmpda_config(case)).map(|r| r.periods),
        Detector::Baseline(b) => b
            .detect(series, case.cell.period_count, &config.baseline)
            .map(|r| r.periods),
    }
}

fn run_case(case: &TestCase, config: &SweepConfig) -> Vec<BenchRecord> {
    let truth: Vec<f64> = case.spec.periods.iter().map(|&p| p as f64).collect();
    let series = case.series();
    config
        .detectors
        .iter()
        .map(|&detector| {
            let mut seconds = 0.0;
            let outcome = series.as_ref().map_err(|e| e.to_string()).and_then(|s| {
                let repeats = config.repeats.max(1);
                let mut last = None;
                let start = Instant::now();
                for _ in 0..repeats {
                    last = Some(run_detector(detector, s, case, config));
                }
                seconds = start.elapsed().as_secs_f64() / repeats as f64;
                last.expect("at least one repeat").map_err(|e| e.to_string())
            });
            let (estimates, error) = match outcome {
                Ok(e) => (e, None),
                Err(msg) => (Vec::new(), Some(msg)),
            };
            let (accuracy, hits) = score(&estimates, &truth, &case.spec.sigmas);
            BenchRecord {
                cell: case.cell,
                case: case.index,
                seed: case.spec.seed,
                truth: case.spec.periods.clone(),
                truth_sigmas: case.spec.sigmas.clone(),
                detector,
                estimates,
                hits,
                accuracy,
                seconds,
                error,
            }
        })
        .collect()
}

/// Runs every detector on every case. Records come back in case order, then
/// detector order, whatever the scheduling.
pub fn run_sweep(cases: &[TestCase], config: &SweepConfig) -> Vec<BenchRecord> {
    #[cfg(feature = "parallel")]
    let nested: Vec<Vec<BenchRecord>> = {
        use rayon::prelude::*;
        cases.par_iter().map(|c| run_case(c, config)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let nested: Vec<Vec<BenchRecord>> = cases.iter().map(|c| run_case(c, config)).collect();
    nested.into_iter().flatten().collect()
}

/// Per-cell, per-detector aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: CellKey,
    pub detector: Detector,
    pub cases: usize,
    pub failures: usize,
    pub mean_accuracy: f64,
    pub ci_half: f64,
    pub mean_seconds: f64,
}

/// Aggregates records in order of first appearance.
pub fn summarize(records: &[BenchRecord]) -> Vec<CellSummary> {
    let mut groups: Vec<((CellKey, Detector), Vec<&BenchRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(k, _)| k.0 == r.cell && k.1 == r.detector) {
            Some((_, members)) => members.push(r),
            None => groups.push(((r.cell, r.detector), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((cell, detector), members)| {
            let acc: Vec<f64> = members.iter().map(|r| r.accuracy).collect();
            let (mean_accuracy, ci_half) = mean_ci(&acc);
            CellSummary {
                cell,
                detector,
                cases: members.len(),
                failures: members.iter().filter(|r| r.error.is_some()).count(),
                mean_accuracy,
                ci_half,
                mean_seconds: members.iter().map(|r| r.seconds).sum::<f64>() / members.len() as f64,
            }
        })
        .collect()
}

pub const CSV_HEADER: &str = "model,|mu|,sigma_spec,beta,n,detector,mean_acc,ci_half,mean_time_s";

pub fn write_csv<W: Write>(summaries: &[CellSummary], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            s.cell.model,
            s.cell.period_count,
            s.cell.sigma,
            s.cell.beta,
            s.cell.events,
            s.detector,
            s.mean_accuracy,
            s.ci_half,
            s.mean_seconds
        )?;
    }
    Ok(())
}

/// Mean wall time of `repeats` detections on one series.
pub fn time_detection(series: &EventSeries, config: &DetectConfig, repeats: usize) -> Result<f64> {
    let repeats = repeats.max(1);
    let start = Instant::now();
    for _ in 0..repeats {
        detect(series, config)?;
    }
    Ok(start.elapsed().as_secs_f64() / repeats as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub events: usize,
    pub length: usize,
    pub losses: Vec<f64>,
    /// Noise series on which detection was refused (too few intervals).
    pub refused: usize,
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLoss {
    pub level: f64,
    pub reps: usize,
    pub seed: u64,
    pub cells: Vec<ReferenceCell>,
    /// Quantile of all pooled samples.
    pub value: f64,
}

/// Runs detection on `reps` uniform-noise series for every
/// (event count, length) pair and returns per-cell and pooled quantiles of
/// the resulting losses. Pairs with more events than ticks are skipped.
pub fn calibrate_reference_loss(
    counts: &[usize],
    lengths: &[usize],
    reps: usize,
    level: f64,
    config: &DetectConfig,
    seed: u64,
) -> Result<ReferenceLoss> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("quantile level {level} outside (0, 1)")));
    }
    if reps == 0 || counts.is_empty() || lengths.is_empty() {
        return Err(Error::Parameter(
            "calibration needs counts, lengths and reps > 0".into(),
        ));
    }
    config.validate()?;
    let mut jobs = Vec::new();
    for &events in counts {
        for &length in lengths {
            if events <= length {
                jobs.push((events, length));
            }
        }
    }
    let run_cell = |cell_index: usize, (events, length): (usize, usize)| -> Result<ReferenceCell> {
        let mut losses = Vec::with_capacity(reps);
        let mut refused = 0;
        for rep in 0..reps {
            let stream = (cell_index * reps + rep) as u64;
            let series = uniform_series(events, length, derive_seed(seed, stream))?;
            match detect(&series, config) {
                Ok(r) => losses.push(r.loss),
                Err(Error::TooFewEvents { .. } | Error::Degenerate(_)) => refused += 1,
                Err(e) => return Err(e),
            }
        }
        let quantile = quantile(&losses, level);
        Ok(ReferenceCell {
            events,
            length,
            losses,
            refused,
            quantile,
        })
    };
    #[cfg(feature = "parallel")]
    let cells: Vec<ReferenceCell> = {
        use rayon::prelude::*;
        jobs.par_iter()
            .enumerate()
            .map(|(i, &j)| run_cell(i, j))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<ReferenceCell> = jobs
        .iter()
        .enumerate()
        .map(|(i, &j)| run_cell(i, j))
        .collect::<Result<_>>()?;

    let pooled: Vec<f64> = cells.iter().flat_map(|c| c.losses.iter().copied()).collect();
    if pooled.is_empty() {
        return Err(Error::Degenerate("every calibration series was refused".into()));
    }
    Ok(ReferenceLoss {
        level,
        reps,
        seed,
        cells,
        value: quantile(&pooled, level),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{suite_specs, GridConfig};
    use crate::model::Model;
    use proptest::prelude::*;

    #[test]
    fn score_examples() {
        assert_eq!(score(&[16.0], &[15.0], &[2.0]).0, 1.0);
        assert_eq!(score(&[16.5], &[15.0], &[2.0]).0, 0.0);
        assert_eq!(score(&[328.0], &[350.0], &[44.0]).0, 1.0);
        assert_eq!(score(&[40.0, 90.0], &[40.0, 90.0], &[3.0, 4.0]).0, 1.0);
        assert_eq!(score(&[], &[40.0], &[3.0]).0, 0.0);
    }

    #[test]
    fn one_estimate_hits_one_truth() {
        // Two truths inside one band: a single estimate counts once.
        let (acc, hits) = score(&[50.0], &[49.0, 51.0], &[10.0, 10.0]);
        assert_eq!(acc, 0.5);
        assert_eq!(hits, vec![true, false]);
    }

    proptest! {
        #[test]
        fn score_is_permutation_symmetric(
            est in proptest::collection::vec(5.0f64..100.0, 0..6),
            truth in proptest::collection::vec((5.0f64..100.0, 0.5f64..20.0), 1..5),
            rot_e in 0usize..6,
            rot_t in 0usize..5,
        ) {
            let mu: Vec<f64> = truth.iter().map(|t| t.0).collect();
            let sg: Vec<f64> = truth.iter().map(|t| t.1).collect();
            let (acc, _) = score(&est, &mu, &sg);
            prop_assert!((0.0..=1.0).contains(&acc));
            let mut e2 = est.clone();
            e2.reverse();
            if !e2.is_empty() {
                let k = rot_e % e2.len();
                e2.rotate_left(k);
            }
            let k = rot_t % mu.len();
            let mut mu2 = mu.clone();
            let mut sg2 = sg.clone();
            mu2.rotate_left(k);
            sg2.rotate_left(k);
            prop_assert_eq!(score(&e2, &mu2, &sg2).0, acc);
        }
    }

    #[test]
    fn ci_and_quantile() {
        let (m, h) = mean_ci(&[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(m, 0.5);
        assert!((h - 1.96 * (1.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(mean_ci(&[0.7]), (0.7, 0.0));
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.01) - 1.04).abs() < 1e-12);
        assert_eq!(quantile(&[0.42], 0.01), 0.42);
    }

    #[test]
    fn empty_suite_gives_empty_output() {
        let records = run_sweep(&[], &SweepConfig::default());
        assert!(records.is_empty());
        let mut out = Vec::new();
        write_csv(&summarize(&records), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim(), CSV_HEADER);
    }

    #[test]
    fn sweep_is_deterministic_and_bounded() {
        let grid = GridConfig::single_cell(Model::Clock, 1, SigmaSpec::Fixed(1.0), 0.0, 50, 4, 9);
        let cases = suite_specs(&grid).unwrap();
        let config = SweepConfig::default();
        let a = run_sweep(&cases, &config);
        let b = run_sweep(&cases, &config);
        assert_eq!(a.len(), 4 * 5);
        let strip = |r: &[BenchRecord]| {
            r.iter()
                .map(|x| (x.estimates.clone(), x.accuracy, x.seed))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        let summary = summarize(&a);
        assert_eq!(summary.len(), 5);
        for s in &summary {
            assert!((0.0..=1.0).contains(&s.mean_accuracy));
            assert_eq!(s.cases, 4);
        }
        let mut out = Vec::new();
        write_csv(&summary, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(1).unwrap().starts_with("clock,1,1,0,50,gmpda,"));
    }

    #[test]
    fn failures_score_zero_and_continue() {
        // Five events over a long series leave no intervals in range.
        let grid = GridConfig::single_cell(Model::Clock, 1, SigmaSpec::Fixed(1.0), 0.0, 5, 2, 1);
        let mut cases = suite_specs(&grid).unwrap();
        for c in &mut cases {
            c.spec.periods = vec![300];
            c.spec.events_per_period = 3;
        }
        let records = run_sweep(&cases, &SweepConfig::default());
        assert_eq!(records.len(), 10);
        let gmpda: Vec<_> = records.iter().filter(|r| r.detector == Detector::Gmpda).collect();
        assert!(gmpda.iter().all(|r| r.error.is_some() && r.accuracy == 0.0));
    }

    #[test]
    fn ci_shrinks_with_more_cases() {
        let config = SweepConfig {
            detectors: vec![Detector::Baseline(Baseline::EPeriodicity)],
            ..SweepConfig::default()
        };
        let half = |cases: usize| {
            let grid = GridConfig::single_cell(Model::RandomWalk, 1, SigmaSpec::LogMu, 0.5, 50, cases, 3);
            summarize(&run_sweep(&suite_specs(&grid).unwrap(), &config))[0].ci_half
        };
        assert!(half(100) < half(25));
    }

    #[test]
    fn single_sample_reference() {
        let config = DetectConfig::default();
        let r = calibrate_reference_loss(&[60], &[2000], 1, 0.01, &config, 5).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].losses.len(), 1);
        assert_eq!(r.value, r.cells[0].losses[0]);
        assert!(calibrate_reference_loss(&[60], &[2000], 1, 1.5, &config, 5).is_err());
    }

    #[test]
    fn detector_names() {
        for d in Detector::all() {
            assert_eq!(d.to_string().parse::<Detector>().unwrap(), d);
        }
        assert_eq!(serde_json::to_string(&Detector::Gmpda).unwrap(), "\"gmpda\"");
    }
}
