//! Synthetic event series under the Clock and Random Walk models, plus the
//! grid of test cases used by the benchmark harness.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, SigmaSpec};
use crate::series::EventSeries;

/// Attempts allowed when a random-walk step fails to move forward.
pub const MAX_STEP_ATTEMPTS: usize = 100;

/// Mixes a master seed with a stream index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Parameters of one synthetic series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub model: Model,
    pub periods: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub offsets: Vec<usize>,
    /// Noise events per periodic event.
    pub beta: f64,
    /// Events generated per period.
    pub events_per_period: usize,
    pub seed: u64,
}

impl GenerativeSpec {
    /// Single-period spec with zero offset.
    pub fn single(model: Model, period: usize, sigma: f64, beta: f64, n: usize, seed: u64) -> Self {
        Self::multi(model, vec![period], vec![sigma], beta, n, seed)
    }

    /// Multi-period spec with zero offsets.
    pub fn multi(model: Model, periods: Vec<usize>, sigmas: Vec<f64>, beta: f64, n: usize, seed: u64) -> Self {
        let offsets = vec![0; periods.len()];
        Self {
            model,
            periods,
            sigmas,
            offsets,
            beta,
            events_per_period: n,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.periods.len();
        if p == 0 {
            return Err(Error::Parameter("at least one period is required".into()));
        }
        if self.sigmas.len() != p || self.offsets.len() != p {
            return Err(Error::Parameter(format!(
                "{} periods but {} sigmas and {} offsets",
                p,
                self.sigmas.len(),
                self.offsets.len()
            )));
        }
        if let Some(mu) = self.periods.iter().find(|&&mu| mu < 2) {
            return Err(Error::Parameter(format!("period {mu} must be at least 2")));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!("sigma {s} must be finite and non-negative")));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!(
                "beta {} must be finite and non-negative",
                self.beta
            )));
        }
        if self.events_per_period == 0 {
            return Err(Error::Parameter("events per period must be positive".into()));
        }
        Ok(())
    }

    /// `N_T = max_p(alpha_p + (n + 1) * mu_p)`.
    pub fn series_length(&self) -> usize {
        self.periods
            .iter()
            .zip(&self.offsets)
            .map(|(&mu, &alpha)| alpha + (self.events_per_period + 1) * mu)
            .max()
            .unwrap_or(0)
    }
}

fn jitter(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma validated"))
}

/// Clock model: `s_i = round(alpha + i * mu + eps)`, `eps ~ N(0, sigma^2)`,
/// union over periods, then uniform noise.
pub fn generate_clock(spec: &GenerativeSpec) -> Result<EventSeries> {
    spec.validate()?;
    let length = spec.series_length();
    let mut stamps = Vec::with_capacity(spec.periods.len() * spec.events_per_period);
    for (p, ((&mu, &sigma), &alpha)) in spec.periods.iter().zip(&spec.sigmas).zip(&spec.offsets).enumerate() {
        let mut rng = rng_for(spec.seed, p as u64);
        let eps = jitter(sigma);
        for i in 1..=spec.events_per_period {
            let centre = (alpha + i * mu) as f64;
            let x = match &eps {
                Some(d) => (centre + d.sample(&mut rng)).round(),
                None => centre,
            };
            if x >= 1.0 && x <= length as f64 {
                stamps.push(x as usize);
            }
        }
    }
    finish(spec, stamps, length)
}

/// Random Walk model: `s_{i+1} = round(s_i + mu + eps)` starting from
/// `s_0 = alpha`. Steps that fail to move forward are redrawn.
pub fn generate_random_walk(spec: &GenerativeSpec) -> Result<EventSeries> {
    spec.validate()?;
    let length = spec.series_length();
    let mut stamps = Vec::with_capacity(spec.periods.len() * spec.events_per_period);
    for (p, ((&mu, &sigma), &alpha)) in spec.periods.iter().zip(&spec.sigmas).zip(&spec.offsets).enumerate() {
        let mut rng = rng_for(spec.seed, p as u64);
        let eps = jitter(sigma);
        let mut current = alpha as f64;
        for _ in 0..spec.events_per_period {
            let next = match &eps {
                None => current + mu as f64,
                Some(d) => {
                    let mut attempt = 0;
                    loop {
                        let candidate = (current + mu as f64 + d.sample(&mut rng)).round();
                        if candidate > current && candidate >= 1.0 {
                            break candidate;
                        }
                        attempt += 1;
                        if attempt >= MAX_STEP_ATTEMPTS {
                            return Err(Error::Parameter(format!(
                                "random walk with mu={mu}, sigma={sigma} failed to advance after {MAX_STEP_ATTEMPTS} draws"
                            )));
                        }
                    }
                }
            };
            current = next;
            if current > length as f64 {
                break;
            }
            stamps.push(current as usize);
        }
    }
    finish(spec, stamps, length)
}

fn finish(spec: &GenerativeSpec, mut stamps: Vec<usize>, length: usize) -> Result<EventSeries> {
    stamps.sort_unstable();
    stamps.dedup();
    let periodic = EventSeries::from_sorted_unchecked(stamps, length);
    Ok(inject_noise(&periodic, spec.beta, derive_seed(spec.seed, u64::MAX)))
}

/// Generates a series according to `spec.model`.
pub fn generate(spec: &GenerativeSpec) -> Result<EventSeries> {
    match spec.model {
        Model::Clock => generate_clock(spec),
        Model::RandomWalk => generate_random_walk(spec),
    }
}

/// Adds `round(beta * |S|)` events drawn uniformly on `[1, N_T]` that do not
/// collide with existing ones. When fewer free ticks remain, all of them are
/// filled.
pub fn inject_noise(series: &EventSeries, beta: f64, seed: u64) -> EventSeries {
    let wanted = (beta.max(0.0) * series.len() as f64).round() as usize;
    if wanted == 0 {
        return series.clone();
    }
    let length = series.length();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free = length - series.len();
    let wanted = wanted.min(free);

    let mut stamps = series.timestamps().to_vec();
    if wanted * 2 <= free {
        let mut taken = vec![false; length + 1];
        for &t in series.timestamps() {
            taken[t] = true;
        }
        let mut added = 0;
        while added < wanted {
            let t = rng.random_range(1..=length);
            if !taken[t] {
                taken[t] = true;
                stamps.push(t);
                added += 1;
            }
        }
    } else {
        let mut present = vec![false; length + 1];
        for &t in series.timestamps() {
            present[t] = true;
        }
        let slots: Vec<usize> = (1..=length).filter(|&t| !present[t]).collect();
        for i in index::sample(&mut rng, slots.len(), wanted) {
            stamps.push(slots[i]);
        }
    }
    stamps.sort_unstable();
    EventSeries::from_sorted_unchecked(stamps, length)
}

/// Uniform noise-only series of `count` distinct events on `[1, length]`.
pub fn uniform_series(count: usize, length: usize, seed: u64) -> Result<EventSeries> {
    if length == 0 {
        return Err(Error::Parameter("series length must be positive".into()));
    }
    let count = count.min(length);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stamps: Vec<usize> = index::sample(&mut rng, length, count)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    stamps.sort_unstable();
    Ok(EventSeries::from_sorted_unchecked(stamps, length))
}

/// Parameter grid for synthetic test suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub models: Vec<Model>,
    pub sigmas: Vec<SigmaSpec>,
    pub events: Vec<usize>,
    pub betas: Vec<f64>,
    pub period_counts: Vec<usize>,
    pub cases_per_cell: usize,
    pub mu_min: usize,
    pub mu_max: usize,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            models: vec![Model::RandomWalk, Model::Clock],
            sigmas: vec![
                SigmaSpec::Fixed(1.0),
                SigmaSpec::LogMu,
                SigmaSpec::MuOver(16.0),
                SigmaSpec::MuOver(8.0),
                SigmaSpec::MuOver(4.0),
                SigmaSpec::MuOver(3.0),
            ],
            events: vec![10, 30, 50, 100, 300, 500],
            betas: vec![0.0, 0.1, 0.5, 0.7, 1.0, 2.0, 4.0, 8.0],
            period_counts: vec![1],
            cases_per_cell: 25,
            mu_min: 10,
            mu_max: 350,
            seed: 0,
        }
    }
}

impl GridConfig {
    /// The full single-period grid at 100 cases per cell.
    pub fn full() -> Self {
        Self {
            cases_per_cell: 100,
            ..Self::default()
        }
    }

    /// A grid with exactly one cell.
    pub fn single_cell(
        model: Model,
        periods: usize,
        sigma: SigmaSpec,
        beta: f64,
        n: usize,
        cases: usize,
        seed: u64,
    ) -> Self {
        Self {
            models: vec![model],
            sigmas: vec![sigma],
            events: vec![n],
            betas: vec![beta],
            period_counts: vec![periods],
            cases_per_cell: cases,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty()
            || self.sigmas.is_empty()
            || self.events.is_empty()
            || self.betas.is_empty()
            || self.period_counts.is_empty()
            || self.cases_per_cell == 0
        {
            return Err(Error::Config("test grid has an empty dimension".into()));
        }
        if self.mu_min < 2 || self.mu_min > self.mu_max {
            return Err(Error::Config(format!(
                "period range [{}, {}] is invalid",
                self.mu_min, self.mu_max
            )));
        }
        if self.period_counts.contains(&0) {
            return Err(Error::Config("period counts must be positive".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.models.len() * self.period_counts.len() * self.sigmas.len() * self.betas.len() * self.events.len()
    }

    pub fn case_count(&self) -> usize {
        self.cell_count() * self.cases_per_cell
    }
}

/// Identifies one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub model: Model,
    pub period_count: usize,
    pub sigma: SigmaSpec,
    pub beta: f64,
    pub events: usize,
}

/// One generated test case.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub cell: CellKey,
    pub index: usize,
    pub spec: GenerativeSpec,
}

impl TestCase {
    pub fn series(&self) -> Result<EventSeries> {
        generate(&self.spec)
    }
}

/// Draws `count` periods uniformly from `[lo, hi]` with pairwise
/// separation greater than `ln(min(mu_p, mu_q))`.
pub fn draw_periods<R: Rng>(rng: &mut R, count: usize, lo: usize, hi: usize) -> Result<Vec<usize>> {
    const MAX_TRIES: usize = 10_000;
    for _ in 0..MAX_TRIES {
        let mut periods: Vec<usize> = (0..count).map(|_| rng.random_range(lo..=hi)).collect();
        periods.sort_unstable();
        let separated = periods.windows(2).all(|w| (w[1] - w[0]) as f64 > (w[0] as f64).ln());
        if separated {
            return Ok(periods);
        }
    }
    Err(Error::Config(format!(
        "could not draw {count} separated periods from [{lo}, {hi}]"
    )))
}

/// Enumerates the specs of a test suite without generating the series.
/// Order: model, period count, sigma, beta, events, case.
pub fn suite_specs(grid: &GridConfig) -> Result<Vec<TestCase>> {
    grid.validate()?;
    let mut cases = Vec::with_capacity(grid.case_count());
    let mut global = 0u64;
    for &model in &grid.models {
        for &period_count in &grid.period_counts {
            for &sigma in &grid.sigmas {
                for &beta in &grid.betas {
                    for &events in &grid.events {
                        let cell = CellKey {
                            model,
                            period_count,
                            sigma,
                            beta,
                            events,
                        };
                        for index in 0..grid.cases_per_cell {
                            let seed = derive_seed(grid.seed, global);
                            global += 1;
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            let periods = draw_periods(&mut rng, period_count, grid.mu_min, grid.mu_max)?;
                            let sigmas = periods.iter().map(|&mu| sigma.resolve(mu as f64)).collect();
                            let spec = GenerativeSpec::multi(model, periods, sigmas, beta, events, seed);
                            cases.push(TestCase { cell, index, spec });
                        }
                    }
                }
            }
        }
    }
    Ok(cases)
}

/// Specs plus their generated series.
pub fn build_test_suite(grid: &GridConfig) -> Result<Vec<(GenerativeSpec, EventSeries)>> {
    suite_specs(grid)?
        .into_iter()
        .map(|case| {
            let series = case.series()?;
            Ok((case.spec, series))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::IntervalHistogram;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn noiseless_models_hit_the_grid() {
        for model in [Model::Clock, Model::RandomWalk] {
            let spec = GenerativeSpec::single(model, 10, 0.0, 0.0, 5, 1);
            let s = generate(&spec).unwrap();
            assert_eq!(s.timestamps(), &[10, 20, 30, 40, 50]);
            assert_eq!(s.length(), 60);
        }
    }

    #[test]
    fn clock_offsets_and_grid() {
        let mut spec = GenerativeSpec::single(Model::Clock, 7, 0.0, 0.0, 4, 3);
        spec.offsets = vec![2];
        let s = generate_clock(&spec).unwrap();
        assert_eq!(s.timestamps(), &[9, 16, 23, 30]);
    }

    #[test]
    fn clock_jitter_statistics() {
        let spec = GenerativeSpec::single(Model::Clock, 100, 2.0, 0.0, 50, 42);
        let s = generate_clock(&spec).unwrap();
        let gaps: Vec<f64> = s.first_order_intervals().map(|g| g as f64).collect();
        let (mean_gap, _) = mean_var(&gaps);
        assert!((mean_gap - 100.0).abs() <= 1.0, "mean gap {mean_gap}");
        let offsets: Vec<f64> = s
            .timestamps()
            .iter()
            .map(|&t| t as f64 - 100.0 * (t as f64 / 100.0).round())
            .collect();
        let (_, var) = mean_var(&offsets);
        let sd = var.sqrt();
        assert!((1.0..=3.0).contains(&sd), "offset sd {sd}");
    }

    #[test]
    fn clock_two_periods_visible_in_histogram() {
        let spec = GenerativeSpec::multi(Model::Clock, vec![10, 25], vec![1.0, 1.0], 0.0, 20, 5);
        let s = generate_clock(&spec).unwrap();
        assert!(s.len() <= 40);
        let h = IntervalHistogram::from_series(&s, 100).unwrap();
        let around = |c: usize| (c - 2..=c + 2).map(|mu| h.count(mu)).sum::<u64>();
        let background = |c: usize| h.count(c);
        assert!(around(10) > 10 && around(25) > 10);
        assert!(around(10) > 4 * background(15) && around(25) > 4 * background(17));
    }

    #[test]
    fn random_walk_interval_variance() {
        let spec = GenerativeSpec::single(Model::RandomWalk, 50, 4.0, 0.0, 300, 11);
        let s = generate_random_walk(&spec).unwrap();
        let gaps: Vec<f64> = s.first_order_intervals().map(|g| g as f64).collect();
        let (_, var) = mean_var(&gaps);
        assert!((12.0..=21.0).contains(&var), "variance {var}");
    }

    #[test]
    fn random_walk_variance_grows_linearly() {
        // Pooled over seeds: per-step variance sigma^2 = 4 gives an m-step
        // variance of 4m.
        let mut per_m = vec![Vec::new(); 5];
        for seed in 0..20 {
            let spec = GenerativeSpec::single(Model::RandomWalk, 30, 2.0, 0.0, 100, seed);
            let ts = generate_random_walk(&spec).unwrap().timestamps().to_vec();
            for m in 1..=5 {
                for w in ts.windows(m + 1) {
                    per_m[m - 1].push((w[m] - w[0]) as f64);
                }
            }
        }
        let vars: Vec<f64> = per_m.iter().map(|xs| mean_var(xs).1).collect();
        let ms: Vec<f64> = (1..=5).map(|m| m as f64).collect();
        let (mx, _) = mean_var(&ms);
        let my = vars.iter().sum::<f64>() / 5.0;
        let slope = ms.iter().zip(&vars).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / ms.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 4.0).abs() <= 0.3 * 4.0, "slope {slope}, vars {vars:?}");
    }

    #[test]
    fn random_walk_intervals_look_normal() {
        use statrs::distribution::{ContinuousCDF, Normal as SNormal};
        let spec = GenerativeSpec::single(Model::RandomWalk, 50, 4.0, 0.0, 500, 2024);
        let s = generate_random_walk(&spec).unwrap();
        // Undo the integer rounding with a uniform dither before comparing
        // against a continuous normal.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut xs: Vec<f64> = s
            .first_order_intervals()
            .map(|g| g as f64 + rng.random_range(-0.5..0.5))
            .collect();
        xs.sort_by(f64::total_cmp);
        let reference = SNormal::new(50.0, (16.0f64 + 1.0 / 6.0).sqrt()).unwrap();
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = reference.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic Kolmogorov tail probability.
        let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
        let p: f64 = 2.0
            * (1..100)
                .map(|k| {
                    let k = k as f64;
                    (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
                })
                .sum::<f64>();
        assert!(p > 0.01, "KS D={d}, p={p}");
    }

    #[test]
    fn negative_sigma_rejected() {
        let spec = GenerativeSpec::single(Model::Clock, 10, -1.0, 0.0, 5, 0);
        assert!(matches!(generate(&spec), Err(Error::Parameter(_))));
        let spec = GenerativeSpec::single(Model::RandomWalk, 10, -1.0, 0.0, 5, 0);
        assert!(matches!(generate(&spec), Err(Error::Parameter(_))));
    }

    #[test]
    fn noise_injection_counts() {
        let base = EventSeries::from_timestamps((1..=100).map(|i| i * 10), 100_000).unwrap();
        assert_eq!(inject_noise(&base, 0.0, 1), base);

        let noisy = inject_noise(&base, 2.0, 1);
        assert_eq!(noisy.len(), 300);
        assert!(base
            .timestamps()
            .iter()
            .all(|t| noisy.timestamps().binary_search(t).is_ok()));

        let small = EventSeries::from_timestamps((1..=10).map(|i| i * 50), 1000).unwrap();
        let noisy = inject_noise(&small, 0.5, 77);
        assert_eq!(noisy.len(), 15);
        assert!(noisy.timestamps().iter().all(|&t| (1..=1000).contains(&t)));
    }

    #[test]
    fn noise_injection_saturates() {
        let base = EventSeries::from_timestamps([1, 2, 3], 6).unwrap();
        let noisy = inject_noise(&base, 8.0, 3);
        assert_eq!(noisy.timestamps(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn full_grid_size() {
        let grid = GridConfig::full();
        assert_eq!(grid.cell_count() / grid.models.len() * grid.cases_per_cell, 28_800);
        let specs = suite_specs(&grid).unwrap();
        assert_eq!(specs.len(), 2 * 28_800);
        assert_eq!(specs.iter().filter(|c| c.spec.model == Model::Clock).count(), 28_800);
    }

    #[test]
    fn single_cell_suite() {
        let grid = GridConfig::single_cell(Model::RandomWalk, 1, SigmaSpec::LogMu, 0.0, 10, 1, 3);
        let suite = build_test_suite(&grid).unwrap();
        assert_eq!(suite.len(), 1);
        let mu = suite[0].0.periods[0];
        assert!((10..=350).contains(&mu));
    }

    #[test]
    fn suites_are_deterministic() {
        let mut grid = GridConfig::single_cell(Model::Clock, 3, SigmaSpec::MuOver(8.0), 0.5, 30, 10, 99);
        grid.betas.push(1.0);
        let a = build_test_suite(&grid).unwrap();
        let b = build_test_suite(&grid).unwrap();
        assert_eq!(a, b);
        for (spec, _) in &a {
            for w in spec.periods.windows(2) {
                assert!((w[1] - w[0]) as f64 > (w[0] as f64).ln());
            }
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let mut grid = GridConfig::default();
        grid.betas.clear();
        assert!(matches!(suite_specs(&grid), Err(Error::Config(_))));
    }
}
