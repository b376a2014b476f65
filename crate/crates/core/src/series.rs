//! Binary event time series and their timestamp sets.
//!
//! A series of length `N_T` is stored as the strictly increasing set of
//! 1-indexed ticks at which an event starts. Duplicate timestamps collapse:
//! a binary series cannot express multiplicity.
//!
//! The text format is one decimal timestamp per line after a
//! `# length=N_T` header. Files without that header are read as dense 0/1
//! series (one or more bits per line).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing event timestamps on `[1, length]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSeries {
    timestamps: Vec<usize>,
    length: usize,
}

impl EventSeries {
    /// Builds a series from a dense 0/1 sequence; position `t` (1-indexed)
    /// becomes a timestamp when its bit is set.
    pub fn from_binary<B: AsRef<[u8]>>(bits: B) -> Result<Self> {
        let bits = bits.as_ref();
        if bits.is_empty() {
            return Err(Error::InvalidSeries("empty binary sequence".into()));
        }
        let mut timestamps = Vec::new();
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => timestamps.push(i + 1),
                other => {
                    return Err(Error::InvalidSeries(format!(
                        "bit {} at position {} is not 0 or 1",
                        other,
                        i + 1
                    )))
                }
            }
        }
        Ok(Self {
            timestamps,
            length: bits.len(),
        })
    }

    /// Builds a series from arbitrary timestamps. Stamps are sorted and
    /// deduplicated; every stamp must lie in `[1, length]`.
    pub fn from_timestamps<I>(stamps: I, length: usize) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<i64>,
    {
        if length == 0 {
            return Err(Error::InvalidSeries("series length must be at least 1".into()));
        }
        let mut timestamps = Vec::new();
        for s in stamps {
            let s: i64 = s.into();
            if s < 1 || s as u64 > length as u64 {
                return Err(Error::OutOfRange { stamp: s, length });
            }
            timestamps.push(s as usize);
        }
        timestamps.sort_unstable();
        timestamps.dedup();
        Ok(Self { timestamps, length })
    }

    /// Internal constructor for callers that already hold a sorted,
    /// deduplicated, in-range set.
    pub(crate) fn from_sorted_unchecked(timestamps: Vec<usize>, length: usize) -> Self {
        debug_assert!(timestamps.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(timestamps.iter().all(|&t| t >= 1 && t <= length));
        Self { timestamps, length }
    }

    pub fn timestamps(&self) -> &[usize] {
        &self.timestamps
    }

    /// Series length `N_T` in ticks.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Number of events `|S|`.
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Dense 0/1 representation of length `N_T`.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut bits = vec![0u8; self.length];
        for &t in &self.timestamps {
            bits[t - 1] = 1;
        }
        bits
    }

    /// Gaps between consecutive events.
    pub fn first_order_intervals(&self) -> impl Iterator<Item = usize> + '_ {
        self.timestamps.windows(2).map(|w| w[1] - w[0])
    }

    /// Every timestamp moved forward by `offset`, with the length extended to match.
    pub fn shifted(&self, offset: usize) -> Self {
        Self {
            timestamps: self.timestamps.iter().map(|t| t + offset).collect(),
            length: self.length + offset,
        }
    }

    /// Average spacing `N_T / |S|`. Only meaningful for a single clean
    /// periodicity; not used by detection.
    pub fn mean_spacing(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.length as f64 / self.len() as f64)
    }

    /// Writes the sparse text format.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# length={}", self.length)?;
        for t in &self.timestamps {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }

    /// Reads either the sparse timestamp format (with a `# length=` header)
    /// or dense 0/1 lines. Blank lines and trailing whitespace are ignored.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut length: Option<usize> = None;
        let mut body: Vec<(usize, String)> = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("length=") {
                    let parsed = value.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: idx + 1,
                        message: format!("bad length header: {e}"),
                    })?;
                    length = Some(parsed);
                }
                continue;
            }
            body.push((idx + 1, trimmed.to_string()));
        }

        match length {
            Some(length) => {
                let mut stamps = Vec::with_capacity(body.len());
                for (line, text) in body {
                    let v = text.parse::<i64>().map_err(|e| Error::Parse {
                        line,
                        message: format!("bad timestamp {text:?}: {e}"),
                    })?;
                    stamps.push(v);
                }
                Self::from_timestamps(stamps, length)
            }
            None => {
                let mut bits = Vec::new();
                for (line, text) in body {
                    for c in text.chars() {
                        match c {
                            '0' => bits.push(0),
                            '1' => bits.push(1),
                            ',' => {}
                            c if c.is_whitespace() => {}
                            other => {
                                return Err(Error::Parse {
                                    line,
                                    message: format!(
                                    "unexpected {other:?} in dense 0/1 input (sparse files need a '# length=' header)"
                                ),
                                })
                            }
                        }
                    }
                }
                Self::from_binary(bits)
            }
        }
    }
}
