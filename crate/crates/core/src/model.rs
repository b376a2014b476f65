use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Generative scheme for the periodic part of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// Events jitter around a fixed grid `alpha + i * mu`.
    #[serde(rename = "clock")]
    Clock,
    /// Each event is the previous one plus `mu` plus jitter.
    #[serde(rename = "rw")]
    RandomWalk,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Clock => "clock",
            Model::RandomWalk => "rw",
        }
    }

    /// Standard deviation of the `m`-th multiple's interval peak as used by
    /// the expected-interval curves and the candidate windows.
    pub fn spread(self, sigma: f64, multiple: usize) -> f64 {
        match self {
            Model::Clock => sigma,
            Model::RandomWalk => sigma * multiple as f64,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clock" | "c" => Ok(Model::Clock),
            "rw" | "random-walk" | "randomwalk" | "random_walk" => Ok(Model::RandomWalk),
            other => Err(Error::Parameter(format!(
                "unknown model {other:?} (expected clock or rw)"
            ))),
        }
    }
}

/// A standard deviation that may depend on the period it belongs to.
///
/// Parses from a literal (`"2.5"`), `"log"` for `ln(mu)`, or `"mu/K"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SigmaSpec {
    Fixed(f64),
    LogMu,
    MuOver(f64),
}

impl SigmaSpec {
    pub fn resolve(self, mu: f64) -> f64 {
        match self {
            SigmaSpec::Fixed(v) => v,
            SigmaSpec::LogMu => mu.ln(),
            SigmaSpec::MuOver(k) => mu / k,
        }
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Fixed(v) => write!(f, "{v}"),
            SigmaSpec::LogMu => f.write_str("log"),
            SigmaSpec::MuOver(k) => write!(f, "mu/{k}"),
        }
    }
}

impl FromStr for SigmaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let bad = || Error::Parameter(format!("bad sigma {s:?} (expected a number, log, or mu/K)"));
        if t == "log" || t == "log(mu)" || t == "ln" {
            return Ok(SigmaSpec::LogMu);
        }
        if let Some(k) = t.strip_prefix("mu/") {
            let k: f64 = k.trim().parse().map_err(|_| bad())?;
            if !(k > 0.0 && k.is_finite()) {
                return Err(bad());
            }
            return Ok(SigmaSpec::MuOver(k));
        }
        let v: f64 = t.parse().map_err(|_| bad())?;
        if !v.is_finite() {
            return Err(bad());
        }
        Ok(SigmaSpec::Fixed(v))
    }
}

impl TryFrom<String> for SigmaSpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<SigmaSpec> for String {
    fn from(value: SigmaSpec) -> Self {
        value.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_spec_forms() {
        assert_eq!("log".parse::<SigmaSpec>().unwrap(), SigmaSpec::LogMu);
        assert_eq!("mu/8".parse::<SigmaSpec>().unwrap(), SigmaSpec::MuOver(8.0));
        assert_eq!("1".parse::<SigmaSpec>().unwrap(), SigmaSpec::Fixed(1.0));
        assert!("mu/0".parse::<SigmaSpec>().is_err());
        assert!("wide".parse::<SigmaSpec>().is_err());
        assert!((SigmaSpec::LogMu.resolve(10.0) - 10f64.ln()).abs() < 1e-12);
        assert_eq!(SigmaSpec::MuOver(16.0).resolve(160.0), 10.0);
        for s in ["log", "mu/16", "mu/3", "2.5"] {
            let parsed: SigmaSpec = s.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<SigmaSpec>().unwrap(), parsed);
        }
    }

    #[test]
    fn model_parsing() {
        assert_eq!("rw".parse::<Model>().unwrap(), Model::RandomWalk);
        assert_eq!("Clock".parse::<Model>().unwrap(), Model::Clock);
        assert!("poisson".parse::<Model>().is_err());
        assert_eq!(Model::RandomWalk.spread(2.0, 3), 6.0);
        assert_eq!(Model::Clock.spread(2.0, 3), 2.0);
    }
}
