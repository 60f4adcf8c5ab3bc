//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines always reach stdout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use windramp::detectors::{detect_endpoint, detect_filtered, detect_minmax, detect_rate, filtered_signal, BinaryDetection};
use windramp::eval::{conditioned_metrics, point_metrics, Metrics};
use windramp::ingest::{ingest_files, parse_scada, ColumnMapping, FarmConfig};
use windramp::linear::{fit_arima, fit_arma, fit_arma_with, persistence_rolling, Trend};
use windramp::lstm::{fit_scaler, gradient_check, init_params, loss, make_windows, predict, train, LstmConfig, WindowedDataset};
use windramp::ramp::{ramp_function, Direction, RampClass, WaveletConfig};
use windramp::series::UniformSeries;
use windramp::synth::{default_composite, default_start, gen_arma, gen_composite, gen_ramp_profile, ArmaSpec, RampProfileSpec, RampSpec, SynthConfig, SynthKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn series(values: &[f64]) -> UniformSeries {
    UniformSeries::from_dense(default_start(), 600, values).unwrap()
}

fn dense(r: &[Option<f64>]) -> Vec<f64> {
    r.iter().map(|v| v.unwrap()).collect()
}

fn c1_ramp_identities() -> Outcome {
    let cfg = WaveletConfig::new(2, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_null = 0.0f64;
    let mut worst_anti = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(40..200);
        let c: f64 = rng.random_range(-1e4..1e4);
        let flat = ramp_function(&series(&vec![c; n]), &cfg).unwrap();
        worst_null = flat.values.iter().fold(worst_null, |w, v| w.max(v.unwrap().abs()));

        // integer-valued power so that sums with an integer offset stay exact
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..8200) as f64).collect();
        let base = ramp_function(&series(&y), &cfg).unwrap();
        let k = rng.random_range(-5000i32..5000) as f64;
        let shifted: Vec<f64> = y.iter().map(|v| v + k).collect();
        let r_shift = ramp_function(&series(&shifted), &cfg).unwrap();
        ensure!(r_shift.values == base.values, "level shift by {k} changed R_t");

        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let r_neg = ramp_function(&series(&neg), &cfg).unwrap();
        for (a, b) in dense(&base.values).iter().zip(dense(&r_neg.values)) {
            worst_anti = worst_anti.max((a + b).abs());
        }

        let lag = rng.random_range(1..30);
        let mut delayed: Vec<f64> = (0..lag).map(|_| rng.random_range(0.0..8200.0)).collect();
        let real: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..8200.0)).collect();
        delayed.extend(&real);
        let r0 = ramp_function(&series(&real), &cfg).unwrap();
        let r1 = ramp_function(&series(&delayed), &cfg).unwrap();
        for t in r0.interior.clone() {
            ensure!(r1.values[t + lag] == r0.values[t], "time shift by {lag} broke equivariance at t={t}");
        }
    }
    ensure!(worst_null <= 1e-12, "constant series gave |R| = {worst_null:e}");
    ensure!(worst_anti <= 1e-12, "antisymmetry error {worst_anti:e}");
    Ok(format!("max |R| on constants {worst_null:e}, antisymmetry {worst_anti:e}"))
}

fn c2_unit_slope_value() -> Outcome {
    let y: Vec<f64> = (0..50).map(f64::from).collect();
    let r = ramp_function(&series(&y), &WaveletConfig::new(2, 3)).unwrap();
    // centred Haar windows on y = t: scale 2 weighs y[t] against y[t+1],
    // scale 3 weighs y[t-1] against y[t+1]; sign correction flips the sum.
    let oracle = -((0.0 - 1.0) / 2f64.sqrt() + (0.0 - 2.0) / 3f64.sqrt());
    ensure!((oracle - 1.8618).abs() < 5e-5, "oracle {oracle} does not round to 1.8618");
    let mut worst = 0.0f64;
    for t in r.interior.clone() {
        worst = worst.max((r.values[t].unwrap() - oracle).abs());
    }
    ensure!(r.interior.len() > 40, "interior too short: {:?}", r.interior);
    ensure!(worst <= 1e-9, "interior R_t deviates from {oracle} by {worst:e}");
    Ok(format!("R_t = {oracle:.12} (1.8618 to 4 d.p.), max deviation {worst:e}"))
}

fn c3_localization() -> Outcome {
    let lambda_max = 36;
    let cfg = WaveletConfig::new(2, lambda_max);
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let duration = rng.random_range(4..=18);
        let midpoint = rng.random_range(120..=280);
        let magnitude = rng.random_range(1500.0..4000.0);
        let direction = if rng.random_bool(0.5) { Direction::Up } else { Direction::Down };
        let config = SynthConfig {
            length: 400,
            interval_secs: 600,
            seed,
            start: default_start(),
            kind: SynthKind::RampProfile(RampProfileSpec {
                base_level: 4100.0,
                events: vec![RampSpec { midpoint, magnitude, duration, direction }],
                noise_sigma: 80.0,
                clip: None,
            }),
        };
        let truth = gen_ramp_profile(&config).unwrap();
        let r = ramp_function(&truth.series, &cfg).unwrap();
        let peak = r
            .interior
            .clone()
            .max_by(|&a, &b| r.values[a].unwrap().abs().total_cmp(&r.values[b].unwrap().abs()))
            .unwrap();
        let mid = truth.events[0].midpoint();
        if peak.abs_diff(mid) <= lambda_max {
            hits += 1;
        }
    }
    ensure!(hits >= 95, "only {hits}/100 peaks within ±{lambda_max} samples");
    Ok(format!("{hits}/100 within ±{lambda_max} samples"))
}

/// Ranks with ties averaged, 1-based.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn c4_lambda_robustness() -> Outcome {
    let narrow = WaveletConfig::new(2, 5);
    let wide = WaveletConfig::new(2, 10);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    let mut check = |y: &UniformSeries| -> Result<(), String> {
        let a = ramp_function(y, &narrow).unwrap();
        let b = ramp_function(y, &wide).unwrap();
        // the wider interior is contained in the narrower one
        let xs: Vec<f64> = b.interior.clone().map(|t| a.values[t].unwrap()).collect();
        let ys: Vec<f64> = b.interior.clone().map(|t| b.values[t].unwrap()).collect();
        let rho = spearman(&xs, &ys);
        worst = worst.min(rho);
        count += 1;
        ensure!(rho >= 0.9, "Spearman {rho:.4} on benchmark series {count}");
        Ok(())
    };
    // the benchmark suite is the default composite generator: ramps on
    // correlated fluctuations, at its native 10-minute cadence
    for seed in 0..10 {
        let (frame, _) = gen_composite(&default_composite(seed).unwrap()).unwrap();
        check(&frame.p_tot)?;
    }
    Ok(format!("min Spearman {worst:.4} over {count} series"))
}

fn ramp_set(d: &BinaryDetection) -> Vec<bool> {
    d.flags.iter().map(|f| f.is_ramp()).collect()
}

fn c5_detector_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let step = Normal::new(0.0, 300.0).unwrap();
    let mut checked = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(30..150);
        let mut level: f64 = rng.random_range(0.0..8200.0);
        let y: Vec<f64> = (0..n)
            .map(|_| {
                level = (level + step.sample(&mut rng)).clamp(0.0, 8200.0);
                level
            })
            .collect();
        let s = series(&y);
        let dt = rng.random_range(1..=12);
        let p_lo = rng.random_range(50.0..2000.0);
        let p_hi = p_lo + rng.random_range(1.0..2000.0);

        let endpoint = detect_endpoint(&s, dt, p_lo).unwrap();
        let minmax = detect_minmax(&s, dt, p_lo).unwrap();
        for (t, (e, m)) in endpoint.flags.iter().zip(&minmax.flags).enumerate() {
            ensure!(!e.is_ramp() || m.is_ramp(), "endpoint flag at t={t} missing from minmax");
            // strict inequality against a directly computed oracle
            if t + dt < n {
                ensure!(e.is_ramp() == ((y[t + dt] - y[t]).abs() > p_lo), "endpoint rule wrong at t={t}");
            }
        }

        // a threshold equal to an observed change never fires on that change
        let t0 = rng.random_range(0..n - dt);
        let exact = (y[t0 + dt] - y[t0]).abs();
        if exact > 0.0 {
            ensure!(!detect_endpoint(&s, dt, exact).unwrap().flags[t0].is_ramp(), "|ΔP| = P_val fired");
            let window = &y[t0..=t0 + dt];
            let range = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - window.iter().cloned().fold(f64::INFINITY, f64::min);
            ensure!(!detect_minmax(&s, dt, range).unwrap().flags[t0].is_ramp(), "range = P_val fired");
        }

        type Rule = fn(&UniformSeries, usize, f64) -> windramp::Result<BinaryDetection>;
        let rules: [(&str, Rule, f64); 4] = [
            ("endpoint", detect_endpoint, 1.0),
            ("minmax", detect_minmax, 1.0),
            ("rate", detect_rate, 1.0 / dt as f64),
            ("filtered", detect_filtered, 1.0),
        ];
        for (name, rule, scale) in rules {
            if name == "filtered" && n < 2 * dt {
                continue;
            }
            let lo = ramp_set(&rule(&s, dt, p_lo * scale).unwrap());
            let hi = ramp_set(&rule(&s, dt, p_hi * scale).unwrap());
            ensure!(lo.iter().zip(&hi).all(|(l, h)| !h || *l), "{name}: raising the threshold added detections");
        }
        checked += 1;
    }

    // 49 % of rated power against a 50 % threshold
    let rated = 8200.0;
    let dt = 6;
    let mut y = vec![1000.0; 20];
    y.extend((1..=dt).map(|k| 1000.0 + 0.49 * rated * k as f64 / dt as f64));
    y.extend(vec![1000.0 + 0.49 * rated; 20]);
    let s = series(&y);
    let p_val = 0.5 * rated;
    let total = [
        detect_endpoint(&s, dt, p_val).unwrap(),
        detect_minmax(&s, dt, p_val).unwrap(),
        detect_rate(&s, dt, p_val / dt as f64).unwrap(),
        detect_filtered(&s, dt, p_val).unwrap(),
    ]
    .iter()
    .map(BinaryDetection::ramp_count)
    .sum::<usize>();
    ensure!(total == 0, "49% change under a 50% threshold produced {total} detections");
    Ok(format!("{checked} random series, 49%-under-50% case silent"))
}

fn c6_filtered_linear() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n_nam = rng.random_range(1..=24);
        let slope: f64 = rng.random_range(-40.0..40.0);
        let len = rng.random_range(2 * n_nam..2 * n_nam + 150);
        let y: Vec<f64> = (0..len).map(|t| slope * t as f64).collect();
        let pf = filtered_signal(&series(&y), n_nam).unwrap();
        let interior: Vec<f64> = pf.values().iter().flatten().copied().collect();
        ensure!(interior.len() == len + 1 - 2 * n_nam, "interior has {} points", interior.len());
        for v in interior {
            worst = worst.max((v - n_nam as f64 * slope).abs());
        }
    }
    ensure!(worst <= 1e-12, "max |P^f - n s| = {worst:e}");
    Ok(format!("max |P^f - n s| = {worst:e}"))
}

fn arma_series(phi: Vec<f64>, theta: Vec<f64>, length: usize, seed: u64) -> Vec<f64> {
    let config = SynthConfig {
        length,
        interval_secs: 600,
        seed,
        start: default_start(),
        kind: SynthKind::Arma(ArmaSpec { phi, theta, sigma: 1.0, mean: 0.0 }),
    };
    gen_arma(&config).unwrap().dense().unwrap()
}

fn c7_arma_estimation() -> Outcome {
    let x = arma_series(vec![0.5, -0.3], vec![], 10_000, 7);
    let m = fit_arma(&x, 2, 0).map_err(|e| e.to_string())?;
    let err = (m.phi[0] - 0.5).abs().max((m.phi[1] + 0.3).abs());
    ensure!(err <= 0.05, "AR(2) estimate {:?}", m.phi);

    // integrate an ARMA(1,1) path, then compare with a hand-differenced fit
    let w = arma_series(vec![0.6], vec![0.3], 3000, 8);
    let mut level = 500.0;
    let y: Vec<f64> = std::iter::once(level)
        .chain(w.iter().map(|d| {
            level += d;
            level
        }))
        .collect();
    let diff: Vec<f64> = y.windows(2).map(|p| p[1] - p[0]).collect();
    let arima = fit_arima(&y, 1, 1, 1).map_err(|e| e.to_string())?;
    let arma = fit_arma_with(&diff, 1, 1, Trend::None).map_err(|e| e.to_string())?;
    let coef_err = arima
        .phi
        .iter()
        .zip(&arma.phi)
        .chain(arima.theta.iter().zip(&arma.theta))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure!(coef_err <= 1e-10, "ARIMA vs differenced ARMA coefficients differ by {coef_err:e}");

    let rw = series(&y);
    let (train_s, test_s) = (rw.slice(0..2000), rw.slice(2000..y.len()));
    let naive = fit_arima(&y[..2000], 0, 1, 0).map_err(|e| e.to_string())?;
    let a = naive.rolling_one_step(&train_s, &test_s).unwrap();
    let b = persistence_rolling(&train_s, &test_s).unwrap();
    ensure!(a == b, "ARIMA(0,1,0) forecasts differ from persistence");
    Ok(format!("AR(2) phi = ({:.4}, {:.4}), ARIMA/ARMA gap {coef_err:e}, ARIMA(0,1,0) == persistence", m.phi[0], m.phi[1]))
}

fn mae(pred: &[f64], actual: &[f64]) -> f64 {
    pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64
}

fn c8_skill_ordering() -> Outcome {
    let x = arma_series(vec![0.8], vec![], 5000, 9);
    let s = series(&x);
    let split = 4000;
    let (train_s, test_s) = (s.slice(0..split), s.slice(split..x.len()));
    let model = fit_arma(&x[..split], 1, 0).map_err(|e| e.to_string())?;
    let ar = model.rolling_one_step(&train_s, &test_s).unwrap();
    let pers = persistence_rolling(&train_s, &test_s).unwrap();
    let (m_ar, m_p) = (mae(&ar, &x[split..]), mae(&pers, &x[split..]));
    ensure!(m_ar < m_p, "AR(1) MAE {m_ar:.4} not below persistence {m_p:.4}");
    Ok(format!("MAE AR(1) {m_ar:.4} < persistence {m_p:.4}"))
}

fn c9_lstm() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(90 + seed);
        let d = rng.random_range(1..=3);
        let lags = rng.random_range(1..=4);
        let cfg = LstmConfig { hidden_size: rng.random_range(2..=6), seed, lags, ..Default::default() };
        let params = init_params(&cfg, d).unwrap();
        let windows: Vec<Vec<f64>> = (0..4).map(|_| (0..lags * d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let targets: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
        let err = gradient_check(&params, &refs, &targets, 1e-5, 1e-6).unwrap();
        worst = worst.max(err);
    }
    ensure!(worst < 1e-4, "gradient check relative error {worst:e}");

    let values: Vec<f64> = (0..400).map(|t| 4000.0 + 3000.0 * (t as f64 * 0.05).sin()).collect();
    let s = series(&values);
    let scaler = fit_scaler(&[&s]).unwrap();
    let ds = make_windows(&[&s], 1, &scaler).unwrap();
    // persistence: the target is the most recent input
    let ds = WindowedDataset { targets: ds.windows.iter().map(|w| w[0]).collect(), ..ds };
    let cfg = LstmConfig { shuffle: true, ..Default::default() };
    let (a, ha) = train(&cfg, &ds).unwrap();
    let (b, hb) = train(&cfg, &ds).unwrap();
    ensure!(a == b && ha.losses == hb.losses, "training is not deterministic");
    let pa = predict(&a, &ds).unwrap();
    let pb = predict(&b, &ds).unwrap();
    ensure!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()), "predictions differ between runs");
    let mse = loss(&a, &ds.window_refs(), &ds.targets).unwrap();
    ensure!(mse < 1e-3, "persistence task training MSE {mse:e}");
    Ok(format!("max gradient error {worst:e}, bit-identical reruns, persistence MSE {mse:e}"))
}

fn naive_metrics(pred: &[f64], actual: &[Option<f64>]) -> Option<(f64, f64, usize)> {
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut n = 0;
    for i in 0..pred.len() {
        if let Some(a) = actual[i] {
            abs += (pred[i] - a).abs();
            sq += (pred[i] - a) * (pred[i] - a);
            n += 1;
        }
    }
    (n > 0).then(|| (abs / n as f64, (sq / n as f64).sqrt(), n))
}

fn same(m: Option<&Metrics>, oracle: Option<(f64, f64, usize)>) -> bool {
    match (m, oracle) {
        (None, None) => true,
        (Some(m), Some((mae, rmse, n))) => m.mae == mae && m.rmse == rmse && m.n == n,
        _ => false,
    }
}

fn c10_metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(1..300);
        // error scales from 0.1 kW to 500 kW
        let scale = 10f64.powf(rng.random_range(-1.0..2.7));
        let noise = Normal::new(0.0, scale).unwrap();
        let actual: Vec<Option<f64>> = (0..n)
            .map(|i| (i == 0 || !rng.random_bool(0.05)).then(|| rng.random_range(0.0..8200.0)))
            .collect();
        let pred: Vec<f64> = actual.iter().map(|a| a.unwrap_or(4100.0) + noise.sample(&mut rng)).collect();
        let labels: Vec<RampClass> = (0..n)
            .map(|_| match rng.random_range(0..10) {
                0 => RampClass::Up,
                1 => RampClass::Down,
                _ => RampClass::NoRamp,
            })
            .collect();

        let overall = point_metrics(&pred, &actual).unwrap();
        ensure!(same(Some(&overall), naive_metrics(&pred, &actual)), "case {case}: point metrics differ from oracle");
        let cond = conditioned_metrics(&pred, &actual, &labels).unwrap();
        for class in [RampClass::Up, RampClass::Down, RampClass::NoRamp] {
            let (p, a): (Vec<f64>, Vec<Option<f64>>) = (0..n).filter(|&i| labels[i] == class && actual[i].is_some()).map(|i| (pred[i], actual[i])).unzip();
            ensure!(same(cond.get(class), naive_metrics(&p, &a)), "case {case}: {class:?} metrics differ from oracle");
        }

        let parts: Vec<&Metrics> = [cond.up.as_ref(), cond.down.as_ref(), cond.none.as_ref()].into_iter().flatten().collect();
        let total: usize = parts.iter().map(|m| m.n).sum();
        ensure!(total == overall.n, "case {case}: class counts {total} != {}", overall.n);
        let mae = parts.iter().map(|m| m.n as f64 * m.mae).sum::<f64>() / total as f64;
        let rmse = (parts.iter().map(|m| m.n as f64 * m.rmse * m.rmse).sum::<f64>() / total as f64).sqrt();
        worst = worst.max((mae - overall.mae).abs()).max((rmse - overall.rmse).abs());
    }
    ensure!(worst <= 1e-12, "recombination error {worst:e}");
    Ok(format!("1000 cases exact, recombination error {worst:e}"))
}

fn c11_protocol_shape() -> Outcome {
    let table5 = [
        "Model",
        "Data sample rate",
        "Data selection",
        "Lags",
        "Fit time (mm:ss)",
        "Forecast time (mm:ss)",
        "Train RMSE",
        "Test RMSE",
        "Train MAE",
        "Test MAE",
        "Positive ramp acc. (RMSE)",
        "Positive ramp acc. (MAE)",
        "Negative ramp acc. (RMSE)",
        "Negative ramp acc. (MAE)",
        "Non-ramp acc. (RMSE)",
        "Non-ramp acc. (MAE)",
    ];
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_windramp"))
        .args(["evaluate", "--out"])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "evaluate failed: {}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("report.csv")).map_err(|e| e.to_string())?;
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    ensure!(header == table5, "report columns {header:?}");
    let rows: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let models: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    ensure!(models == ["Persistence", "ARMA", "ARIMA", "LSTM-RNN"], "models {models:?}");
    let mmss = |s: &str| s.len() == 5 && s.as_bytes()[2] == b':' && s[..2].parse::<u32>().is_ok() && s[3..].parse::<u32>().is_ok_and(|v| v < 60);
    for r in &rows {
        ensure!(&r[1] == "10 min", "sample rate {}", &r[1]);
        ensure!(mmss(&r[4]) && mmss(&r[5]), "timings '{}' '{}' are not mm:ss", &r[4], &r[5]);
        for c in 6..16 {
            ensure!(r[c].parse::<f64>().is_ok() || &r[c] == "-", "cell '{}' in {}", &r[c], table5[c]);
        }
    }
    Ok(format!("{} rows, columns match one-to-one", rows.len()))
}

fn c12_ingest_bookkeeping() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let t0 = Utc.with_ymd_and_hms(2013, 1, 7, 0, 20, 0).unwrap();
    let header = "Wind_turbine_name;Date_time;Ws_avg;Wa_avg;P_avg;Ot_avg";
    for file in 0..50 {
        let mut text = format!("{header}\n");
        let mut data_rows = 0;
        for k in 0..rng.random_range(1..200) {
            let turbine = format!("R80{}", rng.random_range(711..715));
            let ts = (t0 + Duration::minutes(10 * (k / 2))).to_rfc3339();
            let p = format!("{:.1}", rng.random_range(0.0..2050.0));
            let line = match rng.random_range(0..12) {
                0 => format!("{turbine};not-a-date;5.0;180;{p};10"),
                1 => format!("{turbine};{ts};5.0;180"),
                2 => format!("{turbine};{ts};5.0;180;abc;10"),
                3 => format!(";{ts};5.0;180;{p};10"),
                4 => format!("{turbine};{ts};;;{p};"),
                _ => format!("{turbine};{ts};5.0;180;{p};10"),
            };
            text.push_str(&line);
            text.push('\n');
            data_rows += 1;
            if rng.random_bool(0.05) {
                text.push('\n');
            }
        }
        let path = dir.path().join(format!("scada{file}.csv"));
        std::fs::write(&path, &text).unwrap();
        let (_, report) = parse_scada(&path, &ColumnMapping::default()).map_err(|e| e.to_string())?;
        ensure!(
            report.rows_accepted + report.rows_rejected == data_rows,
            "file {file}: {} + {} != {data_rows}",
            report.rows_accepted,
            report.rows_rejected
        );
    }

    // four turbines at 1025 kW each make half of 8200 kW
    let path = dir.path().join("half.csv");
    let mut text = format!("{header}\n");
    for k in 0..6 {
        let ts = (t0 + Duration::minutes(10 * k)).to_rfc3339();
        for wt in ["R80711", "R80721", "R80736", "R80790"] {
            text.push_str(&format!("{wt};{ts};7.5;200;1025.0;12\n"));
        }
    }
    std::fs::write(&path, text).unwrap();
    let (frame, _) = ingest_files(&[&path], &ColumnMapping::default(), &FarmConfig::default()).map_err(|e| e.to_string())?;
    for t in 0..frame.len() {
        ensure!(frame.p_tot.get(t) == Some(4100.0), "P_tot {:?}", frame.p_tot.get(t));
        ensure!(frame.pct_rated.get(t) == Some(50.0), "%P_rated {:?}", frame.pct_rated.get(t));
    }
    Ok("50 files balanced, 4100 kW -> 50.0 %".into())
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("ramp-function identities", c1_ramp_identities),
        ("ramp-function value on y = t", c2_unit_slope_value),
        ("ramp localization", c3_localization),
        ("lambda_max robustness", c4_lambda_robustness),
        ("binary detector laws", c5_detector_laws),
        ("filtered signal on a line", c6_filtered_linear),
        ("ARMA/ARIMA estimation", c7_arma_estimation),
        ("forecast skill ordering", c8_skill_ordering),
        ("LSTM gradients and determinism", c9_lstm),
        ("metrics oracle", c10_metrics_oracle),
        ("report protocol shape", c11_protocol_shape),
        ("ingest bookkeeping", c12_ingest_bookkeeping),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = clock.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
