//! WebAssembly bindings for the browser demo.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`. The plain `*_json` functions hold the logic and are
//! what the native tests call.

use gmpda::baselines::{Baseline, BaselineConfig};
use gmpda::curves::{Coverage, CurveParams};
use gmpda::generator::{generate, GenerativeSpec};
use gmpda::{detect, DetectConfig, DetectionResult, EventSeries, IntervalHistogram, Model, SigmaSpec};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Inputs of the simulate panel.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub model: Model,
    pub periods: Vec<usize>,
    pub sigma: SigmaSpec,
    pub n: usize,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesJson {
    pub timestamps: Vec<usize>,
    pub length: usize,
}

impl SeriesJson {
    fn into_series(self) -> Result<EventSeries, String> {
        EventSeries::from_timestamps(self.timestamps.into_iter().map(|t| t as i64), self.length)
            .map_err(|e| e.to_string())
    }
}

/// Everything the page plots after a detection.
#[derive(Debug, Serialize)]
pub struct Analysis {
    pub result: DetectionResult,
    /// `D(lag)` for lags `0..=loss_length` (entry 0 is zero).
    pub histogram: Vec<u64>,
    /// Expected interaction intervals per lag.
    pub noise: Vec<f64>,
    /// Noise level plus the fitted mixture per lag.
    pub fitted: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub method: String,
    pub periods: Vec<f64>,
    pub error: Option<String>,
}

pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let sigmas = req.periods.iter().map(|&mu| req.sigma.resolve(mu as f64)).collect();
    let spec = GenerativeSpec::multi(req.model, req.periods, sigmas, req.beta, req.n, req.seed);
    let series = generate(&spec).map_err(|e| e.to_string())?;
    let out = SeriesJson {
        timestamps: series.timestamps().to_vec(),
        length: series.length(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn analyze_json(series: &str, config: &str) -> Result<String, String> {
    let series: SeriesJson = serde_json::from_str(series).map_err(|e| e.to_string())?;
    let series = series.into_series()?;
    let config: DetectConfig = serde_json::from_str(config).map_err(|e| e.to_string())?;
    let result = detect(&series, &config).map_err(|e| e.to_string())?;

    let window = config.loss_length.min(series.length());
    let hist = IntervalHistogram::from_series(&series, window).map_err(|e| e.to_string())?;
    let n_t = series.length() as f64;
    let noise: Vec<f64> = (0..=window)
        .map(|lag| {
            if lag == 0 {
                0.0
            } else {
                (result.z_hat * (1.0 - lag as f64 / n_t)).max(0.0)
            }
        })
        .collect();
    let params = CurveParams::new(
        config.model,
        result.periods.clone(),
        result.sigmas.clone(),
        series.length(),
        window,
    );
    let curve = params.curve(&Coverage::from_series(&series));
    let fitted = noise.iter().zip(&curve).map(|(z, g)| z + g).collect();
    let out = Analysis {
        result,
        histogram: hist.counts().to_vec(),
        noise,
        fitted,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn compare_json(series: &str, k: usize) -> Result<String, String> {
    let series: SeriesJson = serde_json::from_str(series).map_err(|e| e.to_string())?;
    let series = series.into_series()?;
    let config = BaselineConfig::default();
    let out: Vec<Comparison> = Baseline::ALL
        .iter()
        .map(|b| match b.detect(&series, k, &config) {
            Ok(r) => Comparison {
                method: b.to_string(),
                periods: r.periods,
                error: None,
            },
            Err(e) => Comparison {
                method: b.to_string(),
                periods: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Generates a series from `{model, periods, sigma, n, beta, seed}`.
#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsError> {
    simulate_json(request).map_err(|e| JsError::new(&e))
}

/// Runs detection on a series with a (partial) detection config.
#[wasm_bindgen]
pub fn analyze(series: &str, config: &str) -> Result<String, JsError> {
    analyze_json(series, config).map_err(|e| JsError::new(&e))
}

/// Top-`k` periods from each baseline detector.
#[wasm_bindgen]
pub fn compare(series: &str, k: usize) -> Result<String, JsError> {
    compare_json(series, k).map_err(|e| JsError::new(&e))
}
