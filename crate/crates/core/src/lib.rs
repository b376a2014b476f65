//! Gaussian mixture periodicity detection for binary event time series.
//!
//! The pipeline turns a set of event timestamps into the histogram of all
//! forward inter-event intervals, removes the expected contribution of
//! interaction intervals, extracts candidate periods with windowed
//! convolutions, optionally refines their spreads by bounded least squares,
//! and picks the period set whose expected-interval curve best explains the
//! histogram.
//!
//! ```
//! use gmpda::generator::generate;
//! use gmpda::{detect, DetectConfig, GenerativeSpec, Model};
//!
//! // 120 events around multiples of 37 ticks, jittered by one tick.
//! let spec = GenerativeSpec::single(Model::Clock, 37, 1.0, 0.0, 120, 7);
//! let series = generate(&spec).unwrap();
//! let config = DetectConfig { model: Model::Clock, ..DetectConfig::default() };
//! let result = detect(&series, &config).unwrap();
//! assert_eq!(result.periods, vec![37.0]);
//! ```

pub mod baselines;
pub mod bench;
pub mod candidates;
pub mod curves;
pub mod detect;
mod error;
pub mod fit;
pub mod generator;
pub mod intervals;
pub mod model;
pub mod series;

pub use detect::{detect, DetectConfig, DetectionResult};
pub use error::{Error, Result};
pub use generator::{GenerativeSpec, GridConfig};
pub use intervals::{IntervalHistogram, NoiseModel};
pub use model::{Model, SigmaSpec};
pub use series::EventSeries;
