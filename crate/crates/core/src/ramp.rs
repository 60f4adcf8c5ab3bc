//! Continuous wavelet ramp function.
//!
//! Each scale `λ` contributes a Haar wavelet coefficient measuring the
//! gradient over a window of `λ` samples; summing the coefficients over
//! `λ₁..=λ_N` gives the ramp function `R_t`, a non-binary ramp-intensity
//! index. Raw Haar coefficients are negative on up-gradients; with
//! `sign_correction` (the default) the sum is negated so that `R_t > 0`
//! means ramp-up.
//!
//! Coefficients are centre-aligned: the coefficient for the window starting
//! at `τ` is stored at index `τ + (λ - 1) / 2`. Positions whose window would
//! overrun either end of the series hold `0`.

use std::ops::Range;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::UniformSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub lambda_min: usize,
    pub lambda_max: usize,
    pub sign_correction: bool,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            lambda_min: 2,
            lambda_max: 6,
            sign_correction: true,
        }
    }
}

impl WaveletConfig {
    pub fn new(lambda_min: usize, lambda_max: usize) -> Self {
        Self {
            lambda_min,
            lambda_max,
            sign_correction: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_min < 2 {
            return Err(Error::invalid(format!(
                "lambda_min must be at least 2 (a gradient needs two samples), got {}",
                self.lambda_min
            )));
        }
        if self.lambda_max < self.lambda_min {
            return Err(Error::invalid(format!(
                "lambda_max ({}) must not be below lambda_min ({})",
                self.lambda_max, self.lambda_min
            )));
        }
        Ok(())
    }

    /// Indices at which every scale in the configured range is evaluable.
    pub fn interior(&self, len: usize) -> Range<usize> {
        let lo = (self.lambda_max - 1) / 2;
        let hi = len.saturating_sub(self.lambda_max / 2);
        lo..hi.max(lo)
    }
}

/// Discrete Haar kernel of length `λ`, normalised by `1/√λ`.
///
/// The first `⌊λ/2⌋` weights are positive, the last `⌊λ/2⌋` negative; an odd
/// kernel has a zero centre weight.
pub fn haar_kernel(lambda: usize) -> Result<Vec<f64>> {
    if lambda < 2 {
        return Err(Error::invalid(format!("wavelet scale must be at least 2, got {lambda}")));
    }
    let w = 1.0 / (lambda as f64).sqrt();
    let half = lambda / 2;
    let mut kernel = vec![0.0; lambda];
    kernel[..half].fill(w);
    kernel[lambda - half..].fill(-w);
    Ok(kernel)
}

/// Coefficients of one scale, aligned to the source series.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoefficients {
    pub scale: usize,
    /// One entry per source point. Edge positions are `Some(0.0)`; a window
    /// containing a missing input yields `None`.
    pub values: Vec<Option<f64>>,
    /// Positions whose window lies entirely inside the series. Everything
    /// outside is zero by the edge policy.
    pub valid: Range<usize>,
}

pub fn wavelet_coefficients(series: &UniformSeries, lambda: usize) -> Result<WaveletCoefficients> {
    if lambda < 2 {
        return Err(Error::invalid(format!("wavelet scale must be at least 2, got {lambda}")));
    }
    let n = series.len();
    if lambda > n {
        return Err(Error::invalid(format!(
            "wavelet scale {lambda} exceeds series length {n}"
        )));
    }
    // Dot product with `haar_kernel(lambda)`, evaluated as
    // (Σ head - Σ tail) / √λ so that a constant offset cancels exactly.
    let norm = 1.0 / (lambda as f64).sqrt();
    let half = lambda / 2;
    let lead = (lambda - 1) / 2;
    let windows = n - lambda + 1;
    let mut values = vec![Some(0.0); n];
    let y = series.values();
    for tau in 0..windows {
        let window = &y[tau..tau + lambda];
        let sum = |part: &[Option<f64>]| part.iter().try_fold(0.0, |acc, v| v.map(|v| acc + v));
        values[tau + lead] = match (sum(&window[..half]), sum(&window[lambda - half..])) {
            (Some(head), Some(tail)) if window.iter().all(Option::is_some) => Some(norm * (head - tail)),
            _ => None,
        };
    }
    Ok(WaveletCoefficients {
        scale: lambda,
        values,
        valid: lead..lead + windows,
    })
}

/// The ramp function `R_t`, one value per source point.
#[derive(Debug, Clone, PartialEq)]
pub struct RampFunctionSeries {
    pub values: Vec<Option<f64>>,
    pub config: WaveletConfig,
    /// Positions where every scale was evaluable.
    pub interior: Range<usize>,
}

impl RampFunctionSeries {
    /// Present values inside the interior.
    pub fn interior_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values[self.interior.clone()].iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, range: Range<usize>) -> RampFunctionSeries {
        let lo = self.interior.start.clamp(range.start, range.end) - range.start;
        let hi = self.interior.end.clamp(range.start, range.end) - range.start;
        RampFunctionSeries {
            values: self.values[range].to_vec(),
            config: self.config,
            interior: lo..hi.max(lo),
        }
    }
}

/// Sums centre-aligned Haar coefficients over scales `λ₁..=λ_N`.
pub fn ramp_function(series: &UniformSeries, config: &WaveletConfig) -> Result<RampFunctionSeries> {
    config.validate()?;
    if series.len() < config.lambda_max {
        return Err(Error::InsufficientData {
            needed: config.lambda_max,
            got: series.len(),
        });
    }
    let sign = if config.sign_correction { -1.0 } else { 1.0 };
    let mut sum: Vec<Option<f64>> = vec![Some(0.0); series.len()];
    // Scales are accumulated in ascending order so the result never depends
    // on evaluation order.
    for lambda in config.lambda_min..=config.lambda_max {
        let coeffs = wavelet_coefficients(series, lambda)?;
        for (acc, c) in sum.iter_mut().zip(&coeffs.values) {
            *acc = match (*acc, c) {
                (Some(a), Some(c)) => Some(a + c),
                _ => None,
            };
        }
    }
    Ok(RampFunctionSeries {
        values: sum.into_iter().map(|v| v.map(|v| sign * v)).collect(),
        config: *config,
        interior: config.interior(series.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampClass {
    Up,
    Down,
    #[serde(rename = "none")]
    NoRamp,
}

impl RampClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RampClass::Up => "up",
            RampClass::Down => "down",
            RampClass::NoRamp => "none",
        }
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            RampClass::Up => Some(Direction::Up),
            RampClass::Down => Some(Direction::Down),
            RampClass::NoRamp => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampClassSeries {
    pub labels: Vec<RampClass>,
    pub threshold: f64,
}

/// How the class threshold `θ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSpec {
    Absolute(f64),
    /// Quantile of `|R_t|` over a reference ramp function.
    Quantile(f64),
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Quantile(0.9)
    }
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdSpec::Absolute(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::invalid(format!("absolute threshold must be positive, got {t}")))
            }
            ThresholdSpec::Quantile(q) if !(q > 0.0 && q < 1.0) => {
                Err(Error::invalid(format!("threshold quantile must lie in (0, 1), got {q}")))
            }
            _ => Ok(()),
        }
    }

    /// Resolves `θ`. Quantiles are taken over the interior of `reference`.
    pub fn resolve(&self, reference: &RampFunctionSeries) -> Result<f64> {
        self.validate()?;
        match *self {
            ThresholdSpec::Absolute(t) => Ok(t),
            ThresholdSpec::Quantile(q) => {
                let mut abs: Vec<f64> = reference.interior_values().map(f64::abs).collect();
                if abs.is_empty() {
                    return Err(Error::invalid("no evaluable ramp-function values to take a quantile over"));
                }
                abs.sort_by(f64::total_cmp);
                Ok(quantile_sorted(&abs, q))
            }
        }
    }
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Labels each step: `Up` iff `R_t > θ`, `Down` iff `R_t < -θ`.
/// Missing `R_t` is labelled `NoRamp`.
pub fn classify(ramp: &RampFunctionSeries, threshold: f64) -> RampClassSeries {
    let labels = ramp
        .values
        .iter()
        .map(|r| match *r {
            Some(r) if r > threshold => RampClass::Up,
            Some(r) if r < -threshold => RampClass::Down,
            _ => RampClass::NoRamp,
        })
        .collect();
    RampClassSeries { labels, threshold }
}

/// Resolves the threshold against `reference` (usually the training span)
/// and classifies `ramp`.
pub fn classify_with(
    ramp: &RampFunctionSeries,
    spec: &ThresholdSpec,
    reference: &RampFunctionSeries,
) -> Result<RampClassSeries> {
    Ok(classify(ramp, spec.resolve(reference)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Up,
    #[serde(rename = "-")]
    Down,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }
}

/// A discrete ramp with its magnitude, duration, rate, timing and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampEvent {
    pub t0: DateTime<Utc>,
    /// Signed power change (source units, e.g. kW).
    pub delta_p: f64,
    pub delta_t_secs: i64,
    /// `delta_p` per minute.
    pub rate: f64,
    pub direction: Direction,
}

impl RampEvent {
    pub fn new(t0: DateTime<Utc>, delta_p: f64, delta_t_secs: i64, direction: Direction) -> Result<Self> {
        if delta_t_secs <= 0 {
            return Err(Error::invalid("ramp duration must be positive"));
        }
        if delta_p * direction.sign() < 0.0 {
            return Err(Error::invalid(format!(
                "ramp magnitude {delta_p} contradicts direction {direction:?}"
            )));
        }
        Ok(Self {
            t0,
            delta_p,
            delta_t_secs,
            rate: delta_p / (delta_t_secs as f64 / 60.0),
            direction,
        })
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.t0 + TimeDelta::seconds(self.delta_t_secs)
    }
}

/// A labelled run that could not be turned into an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRun {
    pub start: usize,
    pub end: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventExtraction {
    pub events: Vec<RampEvent>,
    /// Index span `[start, end]` of the labelled run behind each event.
    pub spans: Vec<(usize, usize)>,
    pub dropped: Vec<DroppedRun>,
}

/// Merges maximal runs of identical non-`NoRamp` labels into events.
///
/// A run `[s, e]` is measured against the sample before it,
/// `b = max(s - 1, 0)`: `ΔP = P[e] - P[b]`, `Δt = max(e - b, 1)` intervals,
/// `t0 = timestamp(b)`.
pub fn extract_events(labels: &[RampClass], power: &UniformSeries) -> Result<EventExtraction> {
    if labels.len() != power.len() {
        return Err(Error::invalid(format!(
            "labels ({}) and power ({}) are not aligned",
            labels.len(),
            power.len()
        )));
    }
    let mut out = EventExtraction::default();
    let mut i = 0;
    while i < labels.len() {
        let Some(direction) = labels[i].direction() else {
            i += 1;
            continue;
        };
        let s = i;
        while i + 1 < labels.len() && labels[i + 1] == labels[s] {
            i += 1;
        }
        let e = i;
        i += 1;

        let b = s.saturating_sub(1);
        let (Some(p_b), Some(p_e)) = (power.get(b), power.get(e)) else {
            out.dropped.push(DroppedRun {
                start: s,
                end: e,
                reason: "missing power at run boundary".into(),
            });
            continue;
        };
        let delta_p = p_e - p_b;
        let steps = (e - b).max(1) as i64;
        match RampEvent::new(power.timestamp(b), delta_p, steps * power.interval_secs(), direction) {
            Ok(ev) => {
                out.events.push(ev);
                out.spans.push((s, e));
            }
            Err(_) => out.dropped.push(DroppedRun {
                start: s,
                end: e,
                reason: format!("power change {delta_p} opposes the {direction:?} label"),
            }),
        }
    }
    Ok(out)
}
