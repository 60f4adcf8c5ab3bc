//! Threshold-based (binary) ramp definitions.
//!
//! Four classic rules, each with a strict `>` comparison:
//!
//! * endpoint: `|y[t+Δt] - y[t]| > P_val`
//! * min-max: `max(y[t..=t+Δt]) - min(y[t..=t+Δt]) > P_val`
//! * rate: `|(y[t+Δt] - y[t]) / Δt| > P_rr`
//! * filtered: `|Pᶠ_t| > P_val` with `Pᶠ_t = mean_{h=1..n}(y[t+h] - y[t+h-n])`
//!
//! Detections are returned for every index of the input; positions where the
//! rule cannot be evaluated (window overruns the series or touches a missing
//! value) are marked [`StepFlag::NotEvaluable`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ramp::{Direction, RampClass};
use crate::series::UniformSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryRampConfig {
    /// Window in samples.
    pub delta_t: usize,
    pub p_val: f64,
    /// Threshold rate, units per sample.
    pub p_rr: f64,
    pub n_nam: usize,
}

impl BinaryRampConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.delta_t == 0 {
            problems.push("delta_t must be positive".to_string());
        }
        if !(self.p_val > 0.0) {
            problems.push(format!("p_val must be positive, got {}", self.p_val));
        }
        if !(self.p_rr > 0.0) {
            problems.push(format!("p_rr must be positive, got {}", self.p_rr));
        }
        if self.n_nam == 0 {
            problems.push("n_nam must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepFlag {
    /// A ramp, with its direction where the definition is signed.
    Ramp(Option<Direction>),
    NoRamp,
    NotEvaluable,
}

impl StepFlag {
    pub fn is_ramp(self) -> bool {
        matches!(self, StepFlag::Ramp(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryDetection {
    pub flags: Vec<StepFlag>,
}

impl BinaryDetection {
    pub fn ramp_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_ramp()).count()
    }

    pub fn evaluable_count(&self) -> usize {
        self.flags.iter().filter(|f| **f != StepFlag::NotEvaluable).count()
    }

    /// Fraction of evaluable steps flagged as ramps.
    pub fn ramp_frequency(&self) -> f64 {
        let n = self.evaluable_count();
        if n == 0 {
            0.0
        } else {
            self.ramp_count() as f64 / n as f64
        }
    }

    /// Indices flagged as ramps.
    pub fn ramp_indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.is_ramp().then_some(i))
            .collect()
    }

    /// Signed flags as ramp classes, for run-merging with
    /// [`extract_events`](crate::ramp::extract_events). Unsigned ramps map to
    /// `NoRamp`.
    pub fn to_labels(&self) -> Vec<RampClass> {
        self.flags
            .iter()
            .map(|f| match f {
                StepFlag::Ramp(Some(Direction::Up)) => RampClass::Up,
                StepFlag::Ramp(Some(Direction::Down)) => RampClass::Down,
                _ => RampClass::NoRamp,
            })
            .collect()
    }
}

fn signed(diff: f64) -> Option<Direction> {
    if diff > 0.0 {
        Some(Direction::Up)
    } else if diff < 0.0 {
        Some(Direction::Down)
    } else {
        None
    }
}

fn check_window(series: &UniformSeries, delta_t: usize) -> Result<()> {
    if delta_t == 0 {
        return Err(Error::invalid("delta_t must be at least one sample"));
    }
    if delta_t >= series.len() {
        return Err(Error::invalid(format!(
            "delta_t ({delta_t}) must be shorter than the series ({})",
            series.len()
        )));
    }
    Ok(())
}

fn check_threshold(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be a positive number, got {v}")))
    }
}

fn pairwise(series: &UniformSeries, delta_t: usize, rule: impl Fn(f64) -> bool) -> BinaryDetection {
    let n = series.len();
    let flags = (0..n)
        .map(|t| {
            if t + delta_t >= n {
                return StepFlag::NotEvaluable;
            }
            match (series.get(t), series.get(t + delta_t)) {
                (Some(a), Some(b)) if rule(b - a) => StepFlag::Ramp(signed(b - a)),
                (Some(_), Some(_)) => StepFlag::NoRamp,
                _ => StepFlag::NotEvaluable,
            }
        })
        .collect();
    BinaryDetection { flags }
}

/// Endpoint magnitude rule.
pub fn detect_endpoint(series: &UniformSeries, delta_t: usize, p_val: f64) -> Result<BinaryDetection> {
    check_window(series, delta_t)?;
    check_threshold("p_val", p_val)?;
    Ok(pairwise(series, delta_t, |d| d.abs() > p_val))
}

/// Range-within-window rule. Unsigned.
pub fn detect_minmax(series: &UniformSeries, delta_t: usize, p_val: f64) -> Result<BinaryDetection> {
    check_window(series, delta_t)?;
    check_threshold("p_val", p_val)?;
    let n = series.len();
    let y = series.values();
    let flags = (0..n)
        .map(|t| {
            if t + delta_t >= n {
                return StepFlag::NotEvaluable;
            }
            let window = &y[t..=t + delta_t];
            if window.iter().any(Option::is_none) {
                return StepFlag::NotEvaluable;
            }
            let (lo, hi) = window
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if hi - lo > p_val {
                StepFlag::Ramp(None)
            } else {
                StepFlag::NoRamp
            }
        })
        .collect();
    Ok(BinaryDetection { flags })
}

/// Ramp-rate rule; `p_rr` is in series units per sample.
pub fn detect_rate(series: &UniformSeries, delta_t: usize, p_rr: f64) -> Result<BinaryDetection> {
    check_window(series, delta_t)?;
    check_threshold("p_rr", p_rr)?;
    let dt = delta_t as f64;
    Ok(pairwise(series, delta_t, |d| (d / dt).abs() > p_rr))
}

/// Filtered signal `Pᶠ_t = mean_{h=1..n}(y[t+h] - y[t+h-n])` with `n = n_nam`.
///
/// Defined for `n - 1 <= t <= len - 1 - n`; elsewhere (and wherever an input
/// is missing) the output is missing.
pub fn filtered_signal(series: &UniformSeries, n_nam: usize) -> Result<UniformSeries> {
    if n_nam == 0 {
        return Err(Error::invalid("n_nam must be positive"));
    }
    let len = series.len();
    if len < 2 * n_nam {
        return Err(Error::InsufficientData {
            needed: 2 * n_nam,
            got: len,
        });
    }
    let n = n_nam;
    let values = (0..len)
        .map(|t| {
            if t + 1 < n || t + n >= len {
                return None;
            }
            let mut acc = 0.0;
            for h in 1..=n {
                acc += series.get(t + h)? - series.get(t + h - n)?;
            }
            Some(acc / n as f64)
        })
        .collect();
    UniformSeries::new(series.start(), series.interval_secs(), values)
}

/// Filtered-signal rule.
pub fn detect_filtered(series: &UniformSeries, n_nam: usize, p_val: f64) -> Result<BinaryDetection> {
    check_threshold("p_val", p_val)?;
    let pf = filtered_signal(series, n_nam)?;
    let flags = pf
        .values()
        .iter()
        .map(|v| match *v {
            Some(v) if v.abs() > p_val => StepFlag::Ramp(signed(v)),
            Some(_) => StepFlag::NoRamp,
            None => StepFlag::NotEvaluable,
        })
        .collect();
    Ok(BinaryDetection { flags })
}

/// Which binary rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Definition {
    Endpoint,
    Minmax,
    Rate,
    Filtered,
}

impl Definition {
    pub const ALL: [Definition; 4] = [
        Definition::Endpoint,
        Definition::Minmax,
        Definition::Rate,
        Definition::Filtered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Definition::Endpoint => "endpoint",
            Definition::Minmax => "minmax",
            Definition::Rate => "rate",
            Definition::Filtered => "filtered",
        }
    }

    pub fn detect(self, series: &UniformSeries, cfg: &BinaryRampConfig) -> Result<BinaryDetection> {
        match self {
            Definition::Endpoint => detect_endpoint(series, cfg.delta_t, cfg.p_val),
            Definition::Minmax => detect_minmax(series, cfg.delta_t, cfg.p_val),
            Definition::Rate => detect_rate(series, cfg.delta_t, cfg.p_rr),
            Definition::Filtered => detect_filtered(series, cfg.n_nam, cfg.p_val),
        }
    }
}

impl std::str::FromStr for Definition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Definition::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown ramp definition '{s}' (endpoint|minmax|rate|filtered)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn series(values: &[f64]) -> UniformSeries {
        UniformSeries::from_dense(Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(), 3600, values).unwrap()
    }

    #[test]
    fn endpoint_is_strict() {
        let d = detect_endpoint(&series(&[0.0, 49.0]), 1, 50.0).unwrap();
        assert_eq!(d.flags, vec![StepFlag::NoRamp, StepFlag::NotEvaluable]);
        let d = detect_endpoint(&series(&[0.0, 50.0]), 1, 50.0).unwrap();
        assert_eq!(d.flags[0], StepFlag::NoRamp);
        let d = detect_endpoint(&series(&[0.0, 51.0]), 1, 50.0).unwrap();
        assert_eq!(d.flags[0], StepFlag::Ramp(Some(Direction::Up)));
        let d = detect_endpoint(&series(&[51.0, 0.0]), 1, 50.0).unwrap();
        assert_eq!(d.flags[0], StepFlag::Ramp(Some(Direction::Down)));
    }

    #[test]
    fn minmax_sees_inside_the_window() {
        let s = series(&[10.0, 80.0, 5.0]);
        assert_eq!(detect_minmax(&s, 2, 50.0).unwrap().flags[0], StepFlag::Ramp(None));
        assert_eq!(detect_endpoint(&s, 2, 50.0).unwrap().flags[0], StepFlag::NoRamp);
        let flat = series(&[3.0; 5]);
        assert_eq!(detect_minmax(&flat, 2, 1e-9).unwrap().ramp_count(), 0);
    }

    #[test]
    fn minmax_missing_window_not_evaluable() {
        let s = UniformSeries::new(series(&[]).start(), 3600, vec![Some(1.0), None, Some(1.0), Some(1.0)]).unwrap();
        let d = detect_minmax(&s, 1, 1.0).unwrap();
        assert_eq!(d.flags[..3], [StepFlag::NotEvaluable, StepFlag::NotEvaluable, StepFlag::NoRamp]);
    }

    #[test]
    fn rate_rule() {
        let mut y = vec![100.0; 7];
        y[6] = 700.0;
        let s = series(&y);
        assert!(detect_rate(&s, 6, 99.0).unwrap().flags[0].is_ramp());
        assert_eq!(detect_rate(&s, 6, 100.0).unwrap().flags[0], StepFlag::NoRamp);
        assert_eq!(detect_rate(&series(&[4.0; 8]), 3, 0.1).unwrap().ramp_count(), 0);
    }

    #[test]
    fn filtered_on_linear_series() {
        let y: Vec<f64> = (0..20).map(|t| 2.0 * t as f64).collect();
        let pf = filtered_signal(&series(&y), 3).unwrap();
        for (t, v) in pf.values().iter().enumerate() {
            if (2..=16).contains(&t) {
                assert_eq!(v.unwrap(), 6.0, "t={t}");
            } else {
                assert!(v.is_none(), "t={t}");
            }
        }
        let flat = filtered_signal(&series(&[1.0; 10]), 2).unwrap();
        assert!(flat.values().iter().flatten().all(|&v| v == 0.0));
        assert!(filtered_signal(&series(&[1.0; 5]), 3).is_err());
    }

    #[test]
    fn filtered_detection_and_labels() {
        let y: Vec<f64> = (0..12).map(|t| 10.0 * t as f64).collect();
        let d = detect_filtered(&series(&y), 2, 15.0).unwrap();
        assert!(d.flags.iter().filter(|f| **f != StepFlag::NotEvaluable).all(|f| *f == StepFlag::Ramp(Some(Direction::Up))));
        assert!(d.to_labels().contains(&RampClass::Up));
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = series(&[1.0, 2.0, 3.0]);
        assert!(detect_endpoint(&s, 3, 1.0).is_err());
        assert!(detect_endpoint(&s, 0, 1.0).is_err());
        assert!(detect_rate(&s, 1, 0.0).is_err());
        assert!(detect_minmax(&s, 1, -1.0).is_err());
        let cfg = BinaryRampConfig { delta_t: 0, p_val: 0.0, p_rr: 1.0, n_nam: 1 };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("delta_t") && msg.contains("p_val"));
    }

    #[test]
    fn definition_parse() {
        for d in Definition::ALL {
            assert_eq!(d.name().parse::<Definition>().unwrap(), d);
        }
        assert!("swinging-door".parse::<Definition>().is_err());
    }
}
