//! Seeded synthetic data with known ground truth.
//!
//! All randomness comes from [`GENERATOR`]: ChaCha8 seeded from a `u64`,
//! with one stream per generated column so columns can be produced
//! independently.

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureFrame;
use crate::linear::max_root_modulus;
use crate::ramp::{Direction, RampEvent};
use crate::series::UniformSeries;

/// Name and version of the pseudo-random generator.
pub const GENERATOR: &str = "chacha8-v1";

/// Samples discarded before an ARMA series is emitted.
pub const ARMA_BURN_IN: usize = 500;

/// Column streams.
pub mod stream {
    pub const POWER: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const WIND_SPEED: u64 = 2;
    pub const DIRECTION: u64 = 3;
    pub const TEMPERATURE: u64 = 4;
    pub const PLACEMENT: u64 = 5;
}

/// Deterministic generator for one column of one seed.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn default_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2013, 1, 7, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaSpec {
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub mean: f64,
}

/// One injected ramp: `magnitude` (> 0) over `duration` samples, centred on
/// `midpoint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub midpoint: usize,
    pub magnitude: f64,
    pub duration: usize,
    pub direction: Direction,
}

impl RampSpec {
    pub fn start(&self) -> usize {
        self.midpoint.saturating_sub(self.duration / 2)
    }

    pub fn end(&self) -> usize {
        self.start() + self.duration
    }
}

/// Rated-power clipping followed by a shut-in drop: once the profile reaches
/// `rated_power` it holds there for `plateau` samples, then falls linearly
/// to `shut_in_level` over `drop_duration` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub rated_power: f64,
    pub plateau: usize,
    pub shut_in_level: f64,
    pub drop_duration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampProfileSpec {
    pub base_level: f64,
    pub events: Vec<RampSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub clip: Option<ClipSpec>,
}

/// A ramp profile whose noise is an ARMA process instead of white noise,
/// plus auxiliary weather columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub profile: RampProfileSpec,
    pub fluctuation: ArmaSpec,
    pub rated_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthKind {
    Arma(ArmaSpec),
    RampProfile(RampProfileSpec),
    Composite(CompositeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub length: usize,
    pub interval_secs: i64,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: SynthKind,
}

/// An injected event and the sample span `[start, end]` it occupies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedEvent {
    pub start: usize,
    pub end: usize,
    pub event: RampEvent,
}

impl InjectedEvent {
    pub fn midpoint(&self) -> usize {
        (self.start + self.end) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub series: UniformSeries,
    pub events: Vec<InjectedEvent>,
}

/// Simulates `x_t = Σ φ_i x_{t-i} + σ ε_t + Σ θ_j σ ε_{t-j}` and returns
/// `mean + x_t` after discarding [`ARMA_BURN_IN`] samples.
pub fn gen_arma(config: &SynthConfig) -> Result<UniformSeries> {
    let SynthKind::Arma(spec) = &config.kind else {
        return Err(Error::invalid("gen_arma needs an arma config"));
    };
    let x = arma_path(spec, config.length, &mut rng_for(config.seed, stream::POWER))?;
    UniformSeries::from_dense(config.start, config.interval_secs, &x)
}

fn arma_path(spec: &ArmaSpec, length: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if !(spec.sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be non-negative, got {}", spec.sigma)));
    }
    if max_root_modulus(&spec.phi) >= 1.0 {
        return Err(Error::invalid(format!("AR coefficients {:?} are not stationary", spec.phi)));
    }
    let total = length + ARMA_BURN_IN;
    let mut x = vec![0.0; total];
    let mut eps = vec![0.0; total];
    for t in 0..total {
        let z: f64 = StandardNormal.sample(rng);
        eps[t] = spec.sigma * z;
        let mut v = eps[t];
        for (i, f) in spec.phi.iter().enumerate() {
            if t > i {
                v += f * x[t - 1 - i];
            }
        }
        for (j, th) in spec.theta.iter().enumerate() {
            if t > j {
                v += th * eps[t - 1 - j];
            }
        }
        x[t] = v;
    }
    Ok(x[ARMA_BURN_IN..].iter().map(|v| v + spec.mean).collect())
}

fn validate_events(events: &[RampSpec], length: usize) -> Result<Vec<RampSpec>> {
    let mut sorted = events.to_vec();
    sorted.sort_by_key(RampSpec::start);
    let mut prev_end = 0;
    for (k, ev) in sorted.iter().enumerate() {
        if ev.duration == 0 || !(ev.magnitude > 0.0) {
            return Err(Error::invalid(format!(
                "event at {} needs a positive duration and magnitude",
                ev.midpoint
            )));
        }
        if ev.midpoint < ev.duration / 2 || ev.end() >= length {
            return Err(Error::invalid(format!(
                "event at {} (duration {}) does not fit in {length} samples",
                ev.midpoint, ev.duration
            )));
        }
        if k > 0 && ev.start() < prev_end {
            return Err(Error::invalid(format!("event at {} overlaps the previous event", ev.midpoint)));
        }
        prev_end = ev.end();
    }
    Ok(sorted)
}

/// `[start, end]` of an injected segment; `None` marks a clipping plateau.
type Span = (usize, usize, Option<Direction>);

/// Noiseless profile and the injected spans, before the final events are
/// measured on it.
fn clean_profile(spec: &RampProfileSpec, length: usize) -> Result<(Vec<f64>, Vec<Span>)> {
    let events = validate_events(&spec.events, length)?;
    let mut raw = vec![spec.base_level; length];
    for ev in &events {
        let (s, e) = (ev.start(), ev.end());
        let dp = ev.direction.sign() * ev.magnitude;
        for (t, v) in raw.iter_mut().enumerate().skip(s + 1) {
            let frac = ((t - s) as f64 / (e - s) as f64).min(1.0);
            *v += dp * frac;
        }
    }
    let mut spans: Vec<Span> =
        events.iter().map(|ev| (ev.start(), ev.end(), Some(ev.direction))).collect();

    let Some(clip) = &spec.clip else {
        return Ok((raw, spans));
    };
    if clip.drop_duration == 0 || clip.plateau == 0 {
        return Err(Error::invalid("clip plateau and drop duration must be positive"));
    }
    let mut out = vec![0.0; length];
    let mut offset = 0.0;
    let mut t = 0;
    while t < length {
        let v = raw[t] + offset;
        if v < clip.rated_power {
            out[t] = v;
            t += 1;
            continue;
        }
        let plateau_end = (t + clip.plateau - 1).min(length - 1);
        out[t..=plateau_end].fill(clip.rated_power);
        let drop_end = plateau_end + clip.drop_duration;
        for (k, slot) in out.iter_mut().enumerate().take((drop_end + 1).min(length)).skip(plateau_end + 1) {
            let frac = (k - plateau_end) as f64 / clip.drop_duration as f64;
            *slot = clip.rated_power + (clip.shut_in_level - clip.rated_power) * frac;
        }
        if drop_end < length {
            spans.push((plateau_end, drop_end, None));
            offset = clip.shut_in_level - raw[drop_end];
        }
        t = drop_end + 1;
    }
    spans.sort_by_key(|s| s.0);
    Ok((out, spans))
}

fn measure_events(clean: &[f64], spans: &[Span], start: DateTime<Utc>, interval: i64) -> Vec<InjectedEvent> {
    spans
        .iter()
        .filter_map(|&(s, e, _)| {
            let dp = clean[e] - clean[s];
            let direction = if dp > 0.0 {
                Direction::Up
            } else if dp < 0.0 {
                Direction::Down
            } else {
                return None;
            };
            let t0 = start + chrono::TimeDelta::seconds(interval * s as i64);
            RampEvent::new(t0, dp, (e - s) as i64 * interval, direction)
                .ok()
                .map(|event| InjectedEvent { start: s, end: e, event })
        })
        .collect()
}

/// Piecewise-linear ramp profile (optionally clipped at rated power with a
/// shut-in drop) plus Gaussian noise. Ground-truth events carry the ΔP
/// realised on the noiseless profile.
pub fn gen_ramp_profile(config: &SynthConfig) -> Result<GroundTruth> {
    let SynthKind::RampProfile(spec) = &config.kind else {
        return Err(Error::invalid("gen_ramp_profile needs a ramp-profile config"));
    };
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    let (clean, spans) = clean_profile(spec, config.length)?;
    let events = measure_events(&clean, &spans, config.start, config.interval_secs);
    let mut rng = rng_for(config.seed, stream::NOISE);
    let values: Vec<f64> = if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
        clean.iter().map(|v| v + normal.sample(&mut rng)).collect()
    } else {
        clean
    };
    Ok(GroundTruth {
        series: UniformSeries::from_dense(config.start, config.interval_secs, &values)?.with_unit("kW"),
        events,
    })
}

/// Ramp profile with ARMA fluctuations, bounded to `[0, rated_power]`,
/// together with synthetic wind speed, direction and temperature columns.
pub fn gen_composite(config: &SynthConfig) -> Result<(FeatureFrame, Vec<InjectedEvent>)> {
    let SynthKind::Composite(spec) = &config.kind else {
        return Err(Error::invalid("gen_composite needs a composite config"));
    };
    if !(spec.rated_power > 0.0) {
        return Err(Error::invalid("rated power must be positive"));
    }
    let (clean, spans) = clean_profile(&spec.profile, config.length)?;
    let events = measure_events(&clean, &spans, config.start, config.interval_secs);
    let fluct = arma_path(&spec.fluctuation, config.length, &mut rng_for(config.seed, stream::NOISE))?;
    let power: Vec<f64> = clean
        .iter()
        .zip(&fluct)
        .map(|(c, f)| (c + f).clamp(0.0, spec.rated_power))
        .collect();

    let mut ws_rng = rng_for(config.seed, stream::WIND_SPEED);
    let ws: Vec<f64> = power
        .iter()
        .map(|p| {
            let z: f64 = StandardNormal.sample(&mut ws_rng);
            (3.0 + 9.0 * (p / spec.rated_power).cbrt() + 0.3 * z).max(0.0)
        })
        .collect();

    let mut dir_rng = rng_for(config.seed, stream::DIRECTION);
    let mut angle: f64 = dir_rng.random_range(0.0..360.0);
    let wa: Vec<f64> = (0..config.length)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut dir_rng);
            angle = (angle + 5.0 * z).rem_euclid(360.0);
            angle
        })
        .collect();

    let mut temp_rng = rng_for(config.seed, stream::TEMPERATURE);
    let per_day = (86_400 / config.interval_secs.max(1)) as f64;
    let ot: Vec<f64> = (0..config.length)
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut temp_rng);
            10.0 + 5.0 * (2.0 * std::f64::consts::PI * t as f64 / per_day).sin() + 0.2 * z
        })
        .collect();

    let frame = FeatureFrame::from_dense_columns(
        config.start,
        config.interval_secs,
        spec.rated_power,
        &power,
        &ws,
        &wa,
        &ot,
    )?;
    Ok((frame, events))
}

/// A month of 10-minute composite farm data with a dozen random ramps,
/// used when no generator is configured.
pub fn default_composite(seed: u64) -> Result<SynthConfig> {
    let length = 30 * 144;
    let events = random_events(seed, length, 12, 3000.0, 7800.0, (1500.0, 4000.0), (4, 18))?;
    Ok(SynthConfig {
        length,
        interval_secs: 600,
        seed,
        start: default_start(),
        kind: SynthKind::Composite(CompositeSpec {
            profile: RampProfileSpec {
                base_level: 3000.0,
                events,
                noise_sigma: 0.0,
                clip: None,
            },
            fluctuation: ArmaSpec {
                phi: vec![0.9],
                theta: vec![],
                sigma: 40.0,
                mean: 0.0,
            },
            rated_power: 8200.0,
        }),
    })
}

/// Places `count` non-overlapping ramps at random, keeping the noiseless
/// level inside `[0, ceiling]` by flipping direction when needed.
pub fn random_events(
    seed: u64,
    length: usize,
    count: usize,
    base_level: f64,
    ceiling: f64,
    magnitude: (f64, f64),
    duration: (usize, usize),
) -> Result<Vec<RampSpec>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let slot = length / count;
    if slot < duration.1 + 4 {
        return Err(Error::invalid(format!(
            "{count} events of up to {} samples do not fit in {length} samples",
            duration.1
        )));
    }
    let mut rng = rng_for(seed, stream::PLACEMENT);
    let mut level = base_level;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let dur = rng.random_range(duration.0..=duration.1);
        let mag: f64 = rng.random_range(magnitude.0..=magnitude.1);
        let lo = k * slot + 2 + dur / 2;
        let hi = (k + 1) * slot - 2 - (dur - dur / 2);
        let midpoint = rng.random_range(lo..=hi.max(lo));
        let mut direction = if rng.random_bool(0.5) { Direction::Up } else { Direction::Down };
        if level + mag > ceiling {
            direction = Direction::Down;
        }
        if level - mag < 0.0 {
            direction = Direction::Up;
        }
        let mag = match direction {
            Direction::Up => mag.min(ceiling - level),
            Direction::Down => mag.min(level),
        };
        if mag <= 0.0 {
            continue;
        }
        level += direction.sign() * mag;
        out.push(RampSpec {
            midpoint,
            magnitude: mag,
            duration: dur,
            direction,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arma_cfg(phi: Vec<f64>, sigma: f64, mean: f64, length: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            length,
            interval_secs: 600,
            seed,
            start: default_start(),
            kind: SynthKind::Arma(ArmaSpec { phi, theta: vec![], sigma, mean }),
        }
    }

    fn profile_cfg(spec: RampProfileSpec, length: usize) -> SynthConfig {
        SynthConfig {
            length,
            interval_secs: 3600,
            seed: 1,
            start: default_start(),
            kind: SynthKind::RampProfile(spec),
        }
    }

    #[test]
    fn ar1_autocorrelation() {
        let x = gen_arma(&arma_cfg(vec![0.8], 1.0, 0.0, 10_000, 42)).unwrap().dense().unwrap();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        assert!((c1 / c0 - 0.8).abs() < 0.05, "{}", c1 / c0);
    }

    #[test]
    fn zero_noise_is_constant() {
        let x = gen_arma(&arma_cfg(vec![0.5], 0.0, 3.5, 50, 1)).unwrap();
        assert!(x.values().iter().all(|v| *v == Some(3.5)));
    }

    #[test]
    fn arma_is_deterministic_and_checked() {
        let a = gen_arma(&arma_cfg(vec![0.3], 1.0, 0.0, 100, 9)).unwrap();
        let b = gen_arma(&arma_cfg(vec![0.3], 1.0, 0.0, 100, 9)).unwrap();
        let c = gen_arma(&arma_cfg(vec![0.3], 1.0, 0.0, 100, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(gen_arma(&arma_cfg(vec![1.01], 1.0, 0.0, 100, 9)).is_err());
    }

    #[test]
    fn single_up_ramp_noiseless() {
        let spec = RampProfileSpec {
            base_level: 1000.0,
            events: vec![RampSpec { midpoint: 20, magnitude: 4000.0, duration: 6, direction: Direction::Up }],
            noise_sigma: 0.0,
            clip: None,
        };
        let gt = gen_ramp_profile(&profile_cfg(spec, 40)).unwrap();
        let y = gt.series.dense().unwrap();
        assert!(y[..=17].iter().all(|&v| v == 1000.0));
        assert!(y[23..].iter().all(|&v| v == 5000.0));
        assert_eq!(gt.events.len(), 1);
        let ev = &gt.events[0];
        assert_eq!((ev.start, ev.end), (17, 23));
        assert_eq!(ev.event.delta_p, 4000.0);
        assert_eq!(ev.event.delta_t_secs, 6 * 3600);
    }

    #[test]
    fn no_events_is_constant() {
        let spec = RampProfileSpec { base_level: 250.0, events: vec![], noise_sigma: 0.0, clip: None };
        let gt = gen_ramp_profile(&profile_cfg(spec, 30)).unwrap();
        assert!(gt.series.values().iter().all(|v| *v == Some(250.0)));
        assert!(gt.events.is_empty());
    }

    #[test]
    fn clipping_plateaus_then_shuts_in() {
        let spec = RampProfileSpec {
            base_level: 6000.0,
            events: vec![RampSpec { midpoint: 20, magnitude: 4000.0, duration: 8, direction: Direction::Up }],
            noise_sigma: 0.0,
            clip: Some(ClipSpec { rated_power: 8200.0, plateau: 5, shut_in_level: 1000.0, drop_duration: 3 }),
        };
        let gt = gen_ramp_profile(&profile_cfg(spec, 60)).unwrap();
        let y = gt.series.dense().unwrap();
        assert!(y.iter().all(|&v| v <= 8200.0));
        let first_rated = y.iter().position(|&v| v == 8200.0).unwrap();
        assert!(y[first_rated..first_rated + 5].iter().all(|&v| v == 8200.0));
        assert_eq!(y[first_rated + 5 + 2], 1000.0);
        assert!(gt.events.iter().any(|e| e.event.direction == Direction::Down && e.event.delta_p == 1000.0 - 8200.0));
        // the profile continues from the shut-in level
        assert!(y[40..].iter().all(|&v| v == 1000.0));
    }

    #[test]
    fn overlapping_events_rejected() {
        let spec = RampProfileSpec {
            base_level: 0.0,
            events: vec![
                RampSpec { midpoint: 10, magnitude: 1.0, duration: 6, direction: Direction::Up },
                RampSpec { midpoint: 12, magnitude: 1.0, duration: 6, direction: Direction::Up },
            ],
            noise_sigma: 0.0,
            clip: None,
        };
        assert!(gen_ramp_profile(&profile_cfg(spec, 40)).is_err());
    }

    #[test]
    fn random_events_fit() {
        let evs = random_events(3, 1000, 5, 2000.0, 8200.0, (1000.0, 3000.0), (3, 12)).unwrap();
        assert_eq!(evs.len(), 5);
        assert!(validate_events(&evs, 1000).is_ok());
    }

    #[test]
    fn composite_has_all_columns() {
        let events = random_events(4, 500, 3, 3000.0, 8200.0, (1500.0, 3000.0), (3, 8)).unwrap();
        let cfg = SynthConfig {
            length: 500,
            interval_secs: 600,
            seed: 4,
            start: default_start(),
            kind: SynthKind::Composite(CompositeSpec {
                profile: RampProfileSpec { base_level: 3000.0, events, noise_sigma: 0.0, clip: None },
                fluctuation: ArmaSpec { phi: vec![0.7], theta: vec![], sigma: 50.0, mean: 0.0 },
                rated_power: 8200.0,
            }),
        };
        let (frame, truth) = gen_composite(&cfg).unwrap();
        assert_eq!(frame.p_tot.len(), 500);
        assert!(frame.p_tot.is_fully_present() && frame.ot.is_fully_present());
        assert!(!truth.is_empty());
        assert_eq!(gen_composite(&cfg).unwrap().0, frame);
    }
}
