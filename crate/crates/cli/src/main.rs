use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmpda::baselines::{Baseline, BaselineConfig};
use gmpda::bench::{calibrate_reference_loss, run_sweep, summarize, write_csv, Detector, SweepConfig};
use gmpda::detect::{LossNorm, MIN_EVENTS};
use gmpda::generator::{generate, suite_specs, GenerativeSpec, GridConfig};
use gmpda::{detect, DetectConfig, DetectionResult, EventSeries, Model, SigmaSpec};
use serde::Serialize;

/// Result files carry this version so readers can detect layout changes.
const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "gmpda", version, about = "Detect periodicities in binary event series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a periodic event series.
    Generate(GenerateArgs),
    /// Detect periods in an event series file.
    Detect(DetectArgs),
    /// Run detectors over a synthetic test grid and write per-cell accuracy.
    Bench(BenchArgs),
    /// Estimate the reference loss from uniform-noise series.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        matches!(s, Switch::On)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "rw")]
    model: Model,
    /// Period(s) in ticks, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    mu: Vec<usize>,
    /// Spread per period: a number, `log`, or `mu/K`. One value applies to all periods.
    #[arg(long, value_delimiter = ',', default_value = "log")]
    sigma: Vec<SigmaSpec>,
    /// Offsets per period in ticks.
    #[arg(long, value_delimiter = ',')]
    offset: Vec<usize>,
    /// Events per period.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Noise events per periodic event.
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write dense 0/1 lines instead of timestamps.
    #[arg(long)]
    dense: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Gmpda,
    Fft,
    Acf,
    Hist,
    Eperiodicity,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "gmpda")]
    method: Method,
    /// Settings file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the real-data defaults (coarser tolerance).
    #[arg(long)]
    real_data: bool,
    #[arg(long)]
    model: Option<Model>,
    #[arg(long)]
    loss_length: Option<usize>,
    #[arg(long)]
    max_periods: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    curve_fit: Option<Switch>,
    #[arg(long)]
    sigma: Option<SigmaSpec>,
    #[arg(long)]
    l_min: Option<usize>,
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long)]
    noise_range: Option<usize>,
    #[arg(long)]
    normalization: Option<LossNorm>,
    /// Periods returned by a baseline method.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid definition (TOML); defaults cover the full single-period grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "gmpda,fft,acf,hist,eperiodicity")]
    detectors: Vec<Detector>,
    /// Overrides the grid's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Start GMPDA from the generating spread rather than a fixed guess.
    #[arg(long, value_enum, default_value = "on")]
    sigma_known: Switch,
    #[arg(long, value_enum, default_value = "off")]
    curve_fit: Switch,
    /// Timed executions per case and detector.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Also write every per-case record as JSON.
    #[arg(long)]
    records: Option<PathBuf>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,30,50,100,200,400")]
    counts: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,4000,8000,16000")]
    lengths: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    reps: usize,
    #[arg(long, default_value_t = 0.01)]
    quantile: f64,
    /// Detection settings file; defaults to a 3-period RandomWalk search up to 350 ticks.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<gmpda::Error> for Failure {
    fn from(e: gmpda::Error) -> Self {
        use gmpda::Error::*;
        match e {
            Parameter(_) | Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => run_generate(a),
        Command::Detect(a) => run_detect(a),
        Command::Bench(a) => run_bench(a),
        Command::Calibrate(a) => run_calibrate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Data(format!("{}: {e}", p.display()))),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("result types serialize");
    bytes.push(b'\n');
    bytes
}

fn run_generate(a: GenerateArgs) -> Outcome {
    let per_period = |len: usize, what: &str| -> Result<(), Failure> {
        if len == 1 || len == a.mu.len() {
            Ok(())
        } else {
            Err(Failure::Usage(format!("--{what} takes one value or one per period")))
        }
    };
    per_period(a.sigma.len(), "sigma")?;
    if !a.offset.is_empty() {
        per_period(a.offset.len(), "offset")?;
    }
    let sigmas =
        a.mu.iter()
            .enumerate()
            .map(|(i, &mu)| a.sigma[i.min(a.sigma.len() - 1)].resolve(mu as f64))
            .collect();
    let mut spec = GenerativeSpec::multi(a.model, a.mu.clone(), sigmas, a.beta, a.n, a.seed);
    if !a.offset.is_empty() {
        spec.offsets = (0..a.mu.len()).map(|i| a.offset[i.min(a.offset.len() - 1)]).collect();
    }
    let series = generate(&spec)?;
    let mut bytes = Vec::new();
    if a.dense {
        for bit in series.to_binary() {
            writeln!(bytes, "{bit}")?;
        }
    } else {
        series.write_text(&mut bytes)?;
    }
    write_output(a.out.as_deref(), &bytes)
}

fn read_series(path: &Path) -> Result<EventSeries, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(gmpda::Error::TooFewEvents {
            found: 0,
            required: MIN_EVENTS,
        }
        .into());
    }
    Ok(EventSeries::read_text(BufReader::new(text.as_bytes()))?)
}

fn read_config(path: &Path) -> Result<DetectConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct GmpdaOutput<'a> {
    schema: u32,
    method: &'static str,
    #[serde(flatten)]
    result: &'a DetectionResult,
}

#[derive(Serialize)]
struct BaselineOutput<'a> {
    schema: u32,
    method: &'static str,
    periods: &'a [f64],
    scores: &'a [f64],
    events: usize,
    series_length: usize,
}

fn run_detect(a: DetectArgs) -> Outcome {
    let mut config = match (&a.config, a.real_data) {
        (Some(path), _) => read_config(path)?,
        (None, true) => DetectConfig::real_data(),
        (None, false) => DetectConfig::default(),
    };
    if let Some(v) = a.model {
        config.model = v;
    }
    if let Some(v) = a.loss_length {
        config.loss_length = v;
    }
    if let Some(v) = a.max_periods {
        config.max_periods = v;
    }
    if let Some(v) = a.tol {
        config.tol = v;
    }
    if let Some(v) = a.curve_fit {
        config.curve_fit = v.into();
    }
    if let Some(v) = a.sigma {
        config.sigma = v;
    }
    if let Some(v) = a.l_min {
        config.l_min = v;
    }
    if let Some(v) = a.l_max {
        config.l_max = v;
    }
    if let Some(v) = a.noise_range {
        config.noise_range = v;
    }
    if let Some(v) = a.normalization {
        config.normalization = v;
    }
    config.validate()?;
    let series = read_series(&a.input)?;

    let baseline = match a.method {
        Method::Gmpda => {
            let result = detect(&series, &config)?;
            let out = GmpdaOutput {
                schema: SCHEMA,
                method: "gmpda",
                result: &result,
            };
            return write_output(a.out.as_deref(), &to_json(&out));
        }
        Method::Fft => Baseline::Fft,
        Method::Acf => Baseline::Acf,
        Method::Hist => Baseline::Hist,
        Method::Eperiodicity => Baseline::EPeriodicity,
    };
    let bconfig = BaselineConfig {
        loss_length: config.loss_length,
        ..BaselineConfig::default()
    };
    let result = baseline.detect(&series, a.k, &bconfig)?;
    let out = BaselineOutput {
        schema: SCHEMA,
        method: baseline.as_str(),
        periods: &result.periods,
        scores: &result.scores,
        events: series.len(),
        series_length: series.length(),
    };
    write_output(a.out.as_deref(), &to_json(&out))
}

fn run_bench(a: BenchArgs) -> Outcome {
    let mut grid = match &a.grid {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            toml::from_str::<GridConfig>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => GridConfig::default(),
    };
    if let Some(seed) = a.seed {
        grid.seed = seed;
    }
    let mut sweep = SweepConfig {
        detectors: a.detectors,
        sigma_known: a.sigma_known.into(),
        repeats: a.repeats,
        ..SweepConfig::default()
    };
    sweep.gmpda.curve_fit = a.curve_fit.into();
    let cases = suite_specs(&grid)?;
    let records = run_sweep(&cases, &sweep);
    if let Some(path) = &a.records {
        write_output(Some(path), &to_json(&records))?;
    }
    let mut csv = Vec::new();
    write_csv(&summarize(&records), &mut csv)?;
    write_output(a.out.as_deref(), &csv)
}

#[derive(Serialize)]
struct CalibrateOutput<'a> {
    schema: u32,
    config: &'a DetectConfig,
    #[serde(flatten)]
    reference: &'a gmpda::bench::ReferenceLoss,
}

fn run_calibrate(a: CalibrateArgs) -> Outcome {
    let config = match &a.config {
        Some(path) => read_config(path)?,
        None => DetectConfig {
            model: Model::RandomWalk,
            l_max: 350,
            max_periods: 3,
            ..DetectConfig::default()
        },
    };
    config.validate()?;
    let reference = calibrate_reference_loss(&a.counts, &a.lengths, a.reps, a.quantile, &config, a.seed)?;
    let out = CalibrateOutput {
        schema: SCHEMA,
        config: &config,
        reference: &reference,
    };
    write_output(a.out.as_deref(), &to_json(&out))
}
