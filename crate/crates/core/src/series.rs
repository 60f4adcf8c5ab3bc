//! Evenly sampled time series and the transformations shared by every
//! other module: resampling, differencing, chronological splitting and
//! min-max scaling.
//!
//! Missing points are explicit `None`s. Every operation states how it
//! propagates them; nothing is imputed here.

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An evenly sampled scalar series.
///
/// Timestamps are implied: point `i` sits at `start + i * interval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformSeries {
    start: DateTime<Utc>,
    interval_secs: i64,
    values: Vec<Option<f64>>,
    #[serde(default)]
    unit: String,
}

impl UniformSeries {
    pub fn new(start: DateTime<Utc>, interval_secs: i64, values: Vec<Option<f64>>) -> Result<Self> {
        if interval_secs <= 0 {
            return Err(Error::invalid(format!(
                "interval must be positive, got {interval_secs} s"
            )));
        }
        Ok(Self {
            start,
            interval_secs,
            values,
            unit: String::new(),
        })
    }

    /// Builds a fully present series.
    pub fn from_dense(start: DateTime<Utc>, interval_secs: i64, values: &[f64]) -> Result<Self> {
        Self::new(start, interval_secs, values.iter().copied().map(Some).collect())
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn interval_secs(&self) -> i64 {
        self.interval_secs
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    pub fn timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + TimeDelta::seconds(self.interval_secs * i as i64)
    }

    /// Timestamp one interval past the last point.
    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len())
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_fully_present(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// All values, or an error naming the first missing index.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| Error::invalid(format!("missing value at index {i} ({})", self.timestamp(i))))
            })
            .collect()
    }

    /// Sub-series over `range`, with its start moved accordingly.
    pub fn slice(&self, range: std::ops::Range<usize>) -> UniformSeries {
        UniformSeries {
            start: self.timestamp(range.start),
            interval_secs: self.interval_secs,
            values: self.values[range].to_vec(),
            unit: self.unit.clone(),
        }
    }

    /// Appends `next`, which must continue this series without a gap.
    pub fn concat(&self, next: &UniformSeries) -> Result<UniformSeries> {
        if next.interval_secs != self.interval_secs {
            return Err(Error::invalid("cannot concatenate series with different intervals"));
        }
        if next.start != self.end() {
            return Err(Error::invalid(format!(
                "series are not contiguous: first ends at {}, second starts at {}",
                self.end(),
                next.start
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&next.values);
        Ok(UniformSeries {
            values,
            ..self.clone()
        })
    }

    /// Same grid, values mapped point-wise (missing stays missing).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> UniformSeries {
        UniformSeries {
            values: self.values.iter().map(|v| v.map(&f)).collect(),
            ..self.clone()
        }
    }

    /// Longest run of consecutive present values, as an index range.
    pub fn longest_present_run(&self) -> std::ops::Range<usize> {
        longest_run(self.values.iter().map(Option::is_some))
    }
}

pub(crate) fn longest_run(flags: impl Iterator<Item = bool>) -> std::ops::Range<usize> {
    let mut best = 0..0;
    let mut cur_start = 0;
    let mut n = 0;
    for (i, ok) in flags.enumerate() {
        n = i + 1;
        if !ok {
            if i - cur_start > best.len() {
                best = cur_start..i;
            }
            cur_start = i + 1;
        }
    }
    if n > cur_start && n - cur_start > best.len() {
        best = cur_start..n;
    }
    best
}

/// Averages a series onto a coarser grid.
///
/// Buckets start on whole multiples of `target_interval_secs` since the Unix
/// epoch; partial leading and trailing buckets are dropped. A bucket with
/// fewer than `min_count` present inputs is missing.
pub fn resample_mean(series: &UniformSeries, target_interval_secs: i64, min_count: usize) -> Result<UniformSeries> {
    let step = series.interval_secs;
    if target_interval_secs <= 0 || target_interval_secs % step != 0 {
        return Err(Error::invalid(format!(
            "target interval {target_interval_secs} s is not an integer multiple of the series interval {step} s"
        )));
    }
    let ratio = (target_interval_secs / step) as usize;
    if min_count == 0 || min_count > ratio {
        return Err(Error::invalid(format!(
            "min_count must be in 1..={ratio} for a {ratio}:1 resample, got {min_count}"
        )));
    }

    let offset = series.start.timestamp().rem_euclid(target_interval_secs);
    let (first, bucket_start) = if offset == 0 {
        (0usize, series.start)
    } else {
        let to_boundary = target_interval_secs - offset;
        let first = (to_boundary + step - 1) / step;
        (first as usize, series.start + TimeDelta::seconds(to_boundary))
    };

    let values = if first >= series.len() {
        Vec::new()
    } else {
        series.values[first..]
            .chunks_exact(ratio)
            .map(|bucket| {
                let present: Vec<f64> = bucket.iter().flatten().copied().collect();
                (present.len() >= min_count).then(|| present.iter().sum::<f64>() / present.len() as f64)
            })
            .collect()
    };

    Ok(UniformSeries {
        start: bucket_start,
        interval_secs: target_interval_secs,
        values,
        unit: series.unit.clone(),
    })
}

/// Applies the first-difference operator `d` times.
///
/// The output is `d` points shorter and starts `d` intervals later. A
/// difference touching a missing value is missing.
pub fn difference(series: &UniformSeries, d: usize) -> Result<UniformSeries> {
    if series.present_count() < d + 1 {
        return Err(Error::InsufficientData {
            needed: d + 1,
            got: series.present_count(),
        });
    }
    let mut values = series.values.clone();
    for _ in 0..d {
        values = values
            .windows(2)
            .map(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            })
            .collect();
    }
    Ok(UniformSeries {
        start: series.timestamp(d),
        interval_secs: series.interval_secs,
        values,
        unit: series.unit.clone(),
    })
}

/// Dense first differences applied `d` times.
pub fn difference_values(values: &[f64], d: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Last value of each differencing level `0..d` of `values`
/// (`anchors[0]` is the last level, `anchors[k]` the last k-th difference).
pub fn difference_anchors(values: &[f64], d: usize) -> Result<Vec<f64>> {
    if values.len() < d {
        return Err(Error::InsufficientData {
            needed: d,
            got: values.len(),
        });
    }
    let mut anchors = Vec::with_capacity(d);
    let mut level = values.to_vec();
    for _ in 0..d {
        anchors.push(*level.last().expect("non-empty level"));
        level = difference_values(&level, 1);
    }
    Ok(anchors)
}

/// Inverts `d = anchors.len()` differences for a block of forecasts that
/// directly follows the observed history.
pub fn integrate(diff_forecasts: &[f64], anchors: &[f64]) -> Vec<f64> {
    let mut out = diff_forecasts.to_vec();
    for &anchor in anchors.iter().rev() {
        let mut acc = anchor;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    out
}

/// How the test block is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    #[default]
    ChronologicalHoldout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    #[serde(default)]
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            mode: SplitMode::ChronologicalHoldout,
        }
    }
}

impl SplitSpec {
    pub fn new(test_fraction: f64) -> Result<Self> {
        let spec = Self {
            test_fraction,
            mode: SplitMode::ChronologicalHoldout,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }

    /// Number of test points for a series of length `n`: `floor(n * f)`.
    pub fn test_len(&self, n: usize) -> usize {
        // The small bias keeps products like 100 * 0.29 from flooring to 28.
        (n as f64 * self.test_fraction + 1e-9).floor() as usize
    }
}

/// Splits off the chronological tail as the test block.
pub fn chronological_split(series: &UniformSeries, spec: &SplitSpec) -> Result<(UniformSeries, UniformSeries)> {
    spec.validate()?;
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let test_len = spec.test_len(n);
    if test_len == 0 || test_len >= n {
        return Err(Error::invalid(format!(
            "split of {n} points at fraction {} leaves an empty train or test block",
            spec.test_fraction
        )));
    }
    let cut = n - test_len;
    Ok((series.slice(0..cut), series.slice(cut..n)))
}

/// Per-feature min-max scaler.
///
/// Maps each feature's training `[min, max]` onto `range` (default `[0, 1]`).
/// A zero-range (constant) feature maps every input to `range.0`, and
/// inverts back to its constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub range: (f64, f64),
}

impl Scaler {
    /// Fits one min/max per column over its present values.
    pub fn fit(columns: &[&[Option<f64>]]) -> Result<Self> {
        let mut mins = Vec::with_capacity(columns.len());
        let mut maxs = Vec::with_capacity(columns.len());
        for (j, col) in columns.iter().enumerate() {
            let mut it = col.iter().flatten().copied();
            let first = it
                .next()
                .ok_or_else(|| Error::invalid(format!("feature column {j} has no present values")))?;
            let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
            mins.push(lo);
            maxs.push(hi);
        }
        Ok(Self {
            mins,
            maxs,
            range: (0.0, 1.0),
        })
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::invalid(format!("scaler range must satisfy hi > lo, got [{lo}, {hi}]")));
        }
        self.range = (lo, hi);
        Ok(self)
    }

    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    fn span(&self, j: usize) -> f64 {
        self.maxs[j] - self.mins[j]
    }

    pub fn apply(&self, j: usize, x: f64) -> f64 {
        let span = self.span(j);
        if span == 0.0 {
            return self.range.0;
        }
        self.range.0 + (x - self.mins[j]) / span * (self.range.1 - self.range.0)
    }

    pub fn invert(&self, j: usize, x: f64) -> f64 {
        let span = self.span(j);
        if span == 0.0 {
            return self.mins[j];
        }
        self.mins[j] + (x - self.range.0) / (self.range.1 - self.range.0) * span
    }
}
