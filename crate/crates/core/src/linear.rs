//! Persistence baseline and ARMA/ARIMA models.
//!
//! The model on the `d`-times differenced series `w` is
//!
//! ```text
//! w_t = c + Σ φ_i w_{t-i} + e_t + Σ θ_j e_{t-j}
//! ```
//!
//! Parameters minimise the conditional sum of squares (CSS) of the one-step
//! residuals `e_t`, conditioning on the first `p` observations with
//! `e_t = 0` before them. The optimiser is Levenberg-Marquardt driven by the
//! exact residual Jacobian (a recursion of the same form as the residuals),
//! started from a two-stage Hannan-Rissanen regression. With `q = 0` the
//! starting regression is already the CSS optimum.
//!
//! Models fitted with `d > 0` carry no constant, so an ARIMA(0,d,0) forecast
//! is the pure random-walk (persistence) forecast.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{difference_anchors, difference_values, integrate, UniformSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArmaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }
}

/// Whether the fitted recursion includes a constant term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Constant,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Final conditional sum of squares.
    pub objective: f64,
    pub n_residuals: usize,
    /// All AR roots outside the unit circle.
    pub stationary: bool,
    /// All MA roots outside the unit circle.
    pub invertible: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub order: ArmaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub trend: Trend,
    /// Innovation variance, `objective / n_residuals`.
    pub sigma2: f64,
    pub diagnostics: FitDiagnostics,
}

/// Wall-clock cost of fitting and forecasting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub fit_secs: f64,
    pub forecast_secs: f64,
}

/// Runs `f` and returns its output with the elapsed time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Every forecast equals the last present value of `history`.
pub fn persistence_forecast(history: &UniformSeries, horizon: usize) -> Result<Vec<f64>> {
    let last = history
        .values()
        .iter()
        .rev()
        .find_map(|v| *v)
        .ok_or_else(|| Error::invalid("persistence needs at least one observed value"))?;
    Ok(vec![last; horizon])
}

/// One-step persistence over `test`: each prediction is the latest value
/// observed before it.
pub fn persistence_rolling(train: &UniformSeries, test: &UniformSeries) -> Result<Vec<f64>> {
    check_contiguous(train, test)?;
    let mut last = persistence_forecast(train, 1)?[0];
    Ok(test
        .values()
        .iter()
        .map(|v| {
            let pred = last;
            if let Some(v) = v {
                last = *v;
            }
            pred
        })
        .collect())
}

fn check_contiguous(train: &UniformSeries, test: &UniformSeries) -> Result<()> {
    if train.interval_secs() != test.interval_secs() || train.end() != test.start() {
        return Err(Error::invalid(format!(
            "test block must directly follow training data (train ends {}, test starts {})",
            train.end(),
            test.start()
        )));
    }
    Ok(())
}

/// ARMA(p, q) with a constant, by CSS.
pub fn fit_arma(series: &[f64], p: usize, q: usize) -> Result<ArmaModel> {
    fit_arma_with(series, p, q, Trend::Constant)
}

/// ARIMA(p, d, q): ARMA on the `d`-times differenced series. A constant is
/// included only when `d = 0`.
pub fn fit_arima(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArmaModel> {
    if d == 0 {
        return fit_arma(series, p, q);
    }
    if series.len() <= d {
        return Err(Error::InsufficientData {
            needed: d + 1,
            got: series.len(),
        });
    }
    let mut model = fit_arma_with(&difference_values(series, d), p, q, Trend::None)?;
    model.order.d = d;
    Ok(model)
}

/// ARMA(p, q) on an already-stationary series with an explicit trend choice.
pub fn fit_arma_with(series: &[f64], p: usize, q: usize, trend: Trend) -> Result<ArmaModel> {
    let n = series.len();
    let needed = 10 * (p + q + 1);
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("input value at index {i}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 1e-24 * mean * mean.max(1.0)) {
        return Err(Error::DegenerateVariance);
    }

    let layout = Layout { p, q, trend };
    let start = hannan_rissanen(series, &layout)?;
    let mut warnings = Vec::new();
    let (params, iterations, converged, objective) = if q == 0 {
        let obj = css_objective(series, &layout, &start);
        (start, 0, true, obj)
    } else {
        levenberg_marquardt(series, &layout, start)
    };
    if !converged {
        warnings.push(format!("optimiser did not converge after {iterations} iterations"));
    }

    let (intercept, phi, theta) = layout.unpack(&params);
    let stationary = max_root_modulus(&phi) < 1.0;
    let neg_theta: Vec<f64> = theta.iter().map(|t| -t).collect();
    let invertible = max_root_modulus(&neg_theta) < 1.0;
    if !stationary {
        warnings.push("fitted AR polynomial is not stationary".into());
    }
    if !invertible {
        warnings.push("fitted MA polynomial is not invertible".into());
    }
    let n_residuals = n - p;
    Ok(ArmaModel {
        order: ArmaOrder { p, d: 0, q },
        phi,
        theta,
        intercept,
        trend,
        sigma2: objective / n_residuals as f64,
        diagnostics: FitDiagnostics {
            iterations,
            converged,
            objective,
            n_residuals,
            stationary,
            invertible,
            warnings,
        },
    })
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    p: usize,
    q: usize,
    trend: Trend,
}

impl Layout {
    fn offset(&self) -> usize {
        usize::from(self.trend == Trend::Constant)
    }

    fn len(&self) -> usize {
        self.offset() + self.p + self.q
    }

    fn unpack(&self, params: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let o = self.offset();
        let c = if o == 1 { params[0] } else { 0.0 };
        (c, params[o..o + self.p].to_vec(), params[o + self.p..].to_vec())
    }
}

/// CSS residuals of `w` for the given parameters (zero before index `p`).
fn residuals(w: &[f64], p: usize, c: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut pred = c;
        for (i, f) in phi.iter().enumerate() {
            pred += f * w[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                pred += th * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

fn css_objective(w: &[f64], layout: &Layout, params: &[f64]) -> f64 {
    let (c, phi, theta) = layout.unpack(params);
    residuals(w, layout.p, c, &phi, &theta)[layout.p..]
        .iter()
        .map(|e| e * e)
        .sum()
}

/// Residuals and their Jacobian (rows `t >= p`).
fn residual_jacobian(w: &[f64], layout: &Layout, params: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let (c, phi, theta) = layout.unpack(params);
    let p = layout.p;
    let k = layout.len();
    let o = layout.offset();
    let e = residuals(w, p, c, &phi, &theta);
    let n = w.len();
    let mut jac = vec![0.0; n * k];
    for t in p..n {
        for col in 0..k {
            let direct = if col < o {
                -1.0
            } else if col < o + p {
                -w[t - 1 - (col - o)]
            } else {
                let lag = col - o - p + 1;
                if t >= lag {
                    -e[t - lag]
                } else {
                    0.0
                }
            };
            let mut acc = direct;
            for (j, th) in theta.iter().enumerate() {
                let lag = j + 1;
                if t >= lag + p {
                    acc -= th * jac[(t - lag) * k + col];
                }
            }
            jac[t * k + col] = acc;
        }
    }
    let rows = n - p;
    let r = DVector::from_iterator(rows, e[p..].iter().copied());
    let j = DMatrix::from_row_slice(rows, k, &jac[p * k..]);
    (r, j)
}

fn levenberg_marquardt(w: &[f64], layout: &Layout, start: Vec<f64>) -> (Vec<f64>, usize, bool, f64) {
    const MAX_ITER: usize = 500;
    let k = layout.len();
    let mut params = start;
    let (mut r, mut jac) = residual_jacobian(w, layout, &params);
    let mut obj = r.norm_squared();
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() <= 1e-12 * (1.0 + obj) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&grad))) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let trial_obj = css_objective(w, layout, &trial);
            if trial_obj.is_finite() && trial_obj < obj {
                let rel = (obj - trial_obj) / obj.max(f64::MIN_POSITIVE);
                let step_small = step.amax() <= 1e-10 * (1.0 + params.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                params = trial;
                obj = trial_obj;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if rel < 1e-12 || step_small {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // No descent direction left at any damping: a (numerical) minimum.
            converged = true;
            break;
        }
        if converged {
            break;
        }
        (r, jac) = residual_jacobian(w, layout, &params);
    }
    (params, iterations, converged, obj)
}

/// Ordinary least squares via SVD.
fn ols(x: DMatrix<f64>, y: DVector<f64>) -> Result<DVector<f64>> {
    x.svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::invalid(format!("least squares failed: {e}")))
}

/// Two-stage Hannan-Rissanen starting values.
fn hannan_rissanen(w: &[f64], layout: &Layout) -> Result<Vec<f64>> {
    let Layout { p, q, trend } = *layout;
    let n = w.len();
    let o = layout.offset();
    if layout.len() == 0 {
        return Ok(Vec::new());
    }

    // Stage 1: long autoregression for innovation proxies.
    let (ehat, first) = if q == 0 {
        (vec![0.0; n], p)
    } else {
        let m = (p + q).max((n / 10).min(20));
        let rows = n - m;
        let x = DMatrix::from_fn(rows, o + m, |r, c| {
            if c < o {
                1.0
            } else {
                w[r + m - 1 - (c - o)]
            }
        });
        let y = DVector::from_iterator(rows, w[m..].iter().copied());
        let beta = ols(x.clone(), y.clone())?;
        let fitted = &x * &beta;
        let mut ehat = vec![0.0; n];
        for r in 0..rows {
            ehat[r + m] = y[r] - fitted[r];
        }
        (ehat, m + q)
    };

    // Stage 2: regress on lagged values and lagged innovation proxies.
    let rows = n - first;
    let k = layout.len();
    let x = DMatrix::from_fn(rows, k, |r, c| {
        let t = r + first;
        if c < o {
            1.0
        } else if c < o + p {
            w[t - 1 - (c - o)]
        } else {
            ehat[t - 1 - (c - o - p)]
        }
    });
    let y = DVector::from_iterator(rows, w[first..].iter().copied());
    let mut params: Vec<f64> = ols(x, y)?.iter().copied().collect();

    // Pull a non-invertible MA start back inside the unit circle.
    if q > 0 {
        for _ in 0..50 {
            let neg: Vec<f64> = params[o + p..].iter().map(|t| -t).collect();
            if max_root_modulus(&neg) < 0.99 {
                break;
            }
            for t in &mut params[o + p..] {
                *t *= 0.8;
            }
        }
    }
    if trend == Trend::None {
        debug_assert_eq!(o, 0);
    }
    Ok(params)
}

/// Largest modulus among the eigenvalues of the companion matrix of
/// `1 - a_1 z - ... - a_k z^k`. Values below 1 mean all roots of the
/// polynomial lie outside the unit circle.
pub fn max_root_modulus(coeffs: &[f64]) -> f64 {
    let k = coeffs.len();
    if k == 0 {
        return 0.0;
    }
    let companion = DMatrix::from_fn(k, k, |r, c| {
        if r == 0 {
            coeffs[c]
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

impl ArmaModel {
    /// Minimum history needed to forecast.
    pub fn min_history(&self) -> usize {
        self.order.p.max(self.order.q) + self.order.d
    }

    /// In-sample residuals of `history` on the differenced scale.
    fn residuals_of(&self, w: &[f64]) -> Vec<f64> {
        residuals(w, self.order.p, self.intercept, &self.phi, &self.theta)
    }

    /// Predicted next differenced value given `w[..t]` and residuals `e[..t]`.
    fn step(&self, w: &[f64], e: &[f64], t: usize) -> f64 {
        let mut pred = self.intercept;
        for (i, f) in self.phi.iter().enumerate() {
            if t > i {
                pred += f * w[t - 1 - i];
            }
        }
        for (j, th) in self.theta.iter().enumerate() {
            if t > j {
                pred += th * e[t - 1 - j];
            }
        }
        pred
    }

    /// `horizon`-step forecast following `history`; future innovations are
    /// zero and MA terms use in-sample residuals.
    pub fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        let needed = self.min_history().max(usize::from(self.order.d > 0));
        if history.len() < needed {
            return Err(Error::InsufficientData {
                needed,
                got: history.len(),
            });
        }
        let d = self.order.d;
        let mut w = difference_values(history, d);
        let mut e = self.residuals_of(&w);
        let n = w.len();
        for t in n..n + horizon {
            let next = self.step(&w, &e, t);
            w.push(next);
            e.push(0.0);
        }
        Ok(integrate(&w[n..], &difference_anchors(history, d)?))
    }

    /// One-step predictions for every index `t >= from` of `values`, each
    /// using only `values[..t]` and frozen parameters.
    pub fn one_step_predictions(&self, values: &[f64], from: usize) -> Result<Vec<f64>> {
        let d = self.order.d;
        let from = from.max(self.min_history()).max(d);
        let w = difference_values(values, d);
        let e = self.residuals_of(&w);
        let levels: Vec<Vec<f64>> = (0..d).map(|k| difference_values(values, k)).collect();
        let mut out = Vec::with_capacity(values.len().saturating_sub(from));
        for t in from..values.len() {
            let w_hat = self.step(&w, &e, t - d);
            let anchors: Vec<f64> = (0..d).map(|k| levels[k][t - 1 - k]).collect();
            out.push(integrate(&[w_hat], &anchors)[0]);
        }
        Ok(out)
    }

    /// Rolling one-step forecasts over `test`, conditioning on all true
    /// values before each point. No refitting.
    pub fn rolling_one_step(&self, train: &UniformSeries, test: &UniformSeries) -> Result<Vec<f64>> {
        check_contiguous(train, test)?;
        let train_v = train.dense()?;
        if train_v.len() < self.min_history().max(1) {
            return Err(Error::InsufficientData {
                needed: self.min_history().max(1),
                got: train_v.len(),
            });
        }
        let mut all = train_v;
        let n_train = all.len();
        all.extend(test.dense()?);
        self.one_step_predictions(&all, n_train)
    }

    /// In-sample one-step fitted values; `None` during warm-up.
    pub fn fitted(&self, train: &[f64]) -> Result<Vec<Option<f64>>> {
        let from = self.min_history().max(self.order.d).max(self.order.p + self.order.d);
        let preds = self.one_step_predictions(train, from)?;
        let mut out = vec![None; train.len() - preds.len()];
        out.extend(preds.into_iter().map(Some));
        Ok(out)
    }
}
