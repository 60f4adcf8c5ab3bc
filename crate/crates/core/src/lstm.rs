//! Single-layer LSTM regressor with a linear readout, trained by BPTT and
//! Adam on mean squared error.
//!
//! Gates are stacked in the order input, forget, candidate, output:
//!
//! ```text
//! z_t = W [x_t; h_{t-1}] + b          (4H rows)
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ŷ   = w_out · h_T + b_out
//! ```
//!
//! The state starts at zero for every window. Training is single-threaded
//! and bit-deterministic for a given seed.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureFrame;
use crate::series::{Scaler, UniformSeries};

/// Which frame columns feed the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Power only.
    #[default]
    Univariate,
    /// Power, wind speed, direction (sin, cos) and temperature.
    Multivariate,
}

impl Selection {
    pub fn as_str(self) -> &'static str {
        match self {
            Selection::Univariate => "univariate",
            Selection::Multivariate => "multivariate",
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            Selection::Univariate => "Univariate",
            Selection::Multivariate => "Multivariate",
        }
    }

    /// Columns of `frame` in network-input order. Power is always first.
    pub fn columns(self, frame: &FeatureFrame) -> Vec<&UniformSeries> {
        match self {
            Selection::Univariate => vec![&frame.p_tot],
            Selection::Multivariate => vec![&frame.p_tot, &frame.ws, &frame.wa_sin, &frame.wa_cos, &frame.ot],
        }
    }
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "univariate" => Ok(Selection::Univariate),
            "multivariate" => Ok(Selection::Multivariate),
            _ => Err(Error::invalid(format!("unknown data selection '{s}' (univariate|multivariate)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub lags: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub selection: Selection,
    /// Seeded per-epoch shuffle of the batch order. Off by default.
    pub shuffle: bool,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            lags: 1,
            hidden_size: 32,
            epochs: 60,
            learning_rate: 0.001,
            batch_size: 32,
            seed: 42,
            selection: Selection::Univariate,
            shuffle: false,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.lags == 0 {
            problems.push("lags must be at least 1".to_string());
        }
        if self.hidden_size == 0 {
            problems.push("hidden_size must be at least 1".to_string());
        }
        if self.epochs == 0 {
            problems.push("epochs must be at least 1".to_string());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }
}

/// Network weights. `w` is `4H × (D + H)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_size: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_size: usize) -> Self {
        let rows = 4 * hidden_size;
        Self {
            input_dim,
            hidden_size,
            w: vec![0.0; rows * (input_dim + hidden_size)],
            b: vec![0.0; rows],
            w_out: vec![0.0; hidden_size],
            b_out: 0.0,
        }
    }

    fn cols(&self) -> usize {
        self.input_dim + self.hidden_size
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len() + self.w_out.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All parameters in the order `w, b, w_out, b_out`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.w_out);
        v.push(self.b_out);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let (w, rest) = flat.split_at(self.w.len());
        let (b, rest) = rest.split_at(self.b.len());
        let (w_out, rest) = rest.split_at(self.w_out.len());
        self.w.copy_from_slice(w);
        self.b.copy_from_slice(b);
        self.w_out.copy_from_slice(w_out);
        self.b_out = rest[0];
    }

    /// Forget-gate slice of the bias.
    pub fn forget_bias(&self) -> &[f64] {
        &self.b[self.hidden_size..2 * self.hidden_size]
    }

    fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).chain(&self.w_out).all(|v| v.is_finite()) && self.b_out.is_finite()
    }
}

/// Seeded uniform init in `±1/√fan_in`; forget bias +1, other biases 0.
pub fn init_params(config: &LstmConfig, input_dim: usize) -> Result<LstmParams> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::invalid("input_dim must be at least 1"));
    }
    let h = config.hidden_size;
    let mut p = LstmParams::zeros(input_dim, h);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let a = 1.0 / ((input_dim + h) as f64).sqrt();
    for w in &mut p.w {
        *w = rng.random_range(-a..a);
    }
    let a = 1.0 / (h as f64).sqrt();
    for w in &mut p.w_out {
        *w = rng.random_range(-a..a);
    }
    p.b[h..2 * h].fill(1.0);
    Ok(p)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Per step: `[x_t; h_{t-1}]`.
    xh: Vec<Vec<f64>>,
    /// Per step gate activations, `4H`, in gate order.
    gates: Vec<Vec<f64>>,
    /// Per step cell state, with `c[0]` the zero initial state.
    c: Vec<Vec<f64>>,
    h_last: Vec<f64>,
}

/// Runs the cell over a window of `lags` rows, each `input_dim` wide.
pub fn forward(params: &LstmParams, window: &[f64]) -> Result<(f64, Cache)> {
    let d = params.input_dim;
    let hs = params.hidden_size;
    let cols = params.cols();
    if d == 0 || !window.len().is_multiple_of(d) || window.is_empty() {
        return Err(Error::invalid(format!("window length {} is not a multiple of input_dim {d}", window.len())));
    }
    let steps = window.len() / d;
    let mut h = vec![0.0; hs];
    let mut cache = Cache {
        xh: Vec::with_capacity(steps),
        gates: Vec::with_capacity(steps),
        c: vec![vec![0.0; hs]],
        h_last: Vec::new(),
    };
    for t in 0..steps {
        let mut xh = Vec::with_capacity(cols);
        xh.extend_from_slice(&window[t * d..(t + 1) * d]);
        xh.extend_from_slice(&h);
        let mut gates = params.b.clone();
        for (r, z) in gates.iter_mut().enumerate() {
            let row = &params.w[r * cols..(r + 1) * cols];
            *z += row.iter().zip(&xh).map(|(w, x)| w * x).sum::<f64>();
        }
        for (r, z) in gates.iter_mut().enumerate() {
            *z = if r / hs == 2 { z.tanh() } else { sigmoid(*z) };
        }
        let c_prev = &cache.c[t];
        let mut c = vec![0.0; hs];
        for k in 0..hs {
            let (i, f, g, o) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
            c[k] = f * c_prev[k] + i * g;
            h[k] = o * c[k].tanh();
        }
        cache.xh.push(xh);
        cache.gates.push(gates);
        cache.c.push(c);
    }
    let y = params.b_out + params.w_out.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>();
    if !y.is_finite() || h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("forward pass produced {y}")));
    }
    cache.h_last = h;
    Ok((y, cache))
}

/// Accumulates `scale · ∂(ŷ)/∂θ · dy` into `grad` (same layout as params).
fn backward(params: &LstmParams, cache: &Cache, dy: f64, grad: &mut LstmParams) {
    let hs = params.hidden_size;
    let cols = params.cols();
    let d = params.input_dim;
    grad.b_out += dy;
    for (g, h) in grad.w_out.iter_mut().zip(&cache.h_last) {
        *g += dy * h;
    }
    let mut dh: Vec<f64> = params.w_out.iter().map(|w| w * dy).collect();
    let mut dc = vec![0.0; hs];
    let mut dz = vec![0.0; 4 * hs];
    for t in (0..cache.xh.len()).rev() {
        let gates = &cache.gates[t];
        let c = &cache.c[t + 1];
        let c_prev = &cache.c[t];
        for k in 0..hs {
            let (i, f, g, o) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
            let tc = c[k].tanh();
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * o * (1.0 - tc * tc);
            let di = dc[k] * g;
            let dg = dc[k] * i;
            let df = dc[k] * c_prev[k];
            dc[k] *= f;
            dz[k] = di * i * (1.0 - i);
            dz[hs + k] = df * f * (1.0 - f);
            dz[2 * hs + k] = dg * (1.0 - g * g);
            dz[3 * hs + k] = d_o * o * (1.0 - o);
        }
        let xh = &cache.xh[t];
        dh.fill(0.0);
        for (r, &z) in dz.iter().enumerate() {
            grad.b[r] += z;
            if z == 0.0 {
                continue;
            }
            let grow = &mut grad.w[r * cols..(r + 1) * cols];
            for (g, x) in grow.iter_mut().zip(xh) {
                *g += z * x;
            }
            let wrow = &params.w[r * cols + d..(r + 1) * cols];
            for (acc, w) in dh.iter_mut().zip(wrow) {
                *acc += z * w;
            }
        }
    }
}

/// Mean squared error over `batch` (pairs of window and target).
pub fn loss(params: &LstmParams, windows: &[&[f64]], targets: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (w, t) in windows.iter().zip(targets) {
        let (y, _) = forward(params, w)?;
        sum += (y - t) * (y - t);
    }
    Ok(sum / windows.len() as f64)
}

/// Exact gradients of the batch MSE, plus the loss itself.
pub fn gradients(params: &LstmParams, windows: &[&[f64]], targets: &[f64]) -> Result<(LstmParams, f64)> {
    if windows.is_empty() || windows.len() != targets.len() {
        return Err(Error::invalid("gradient batch must be non-empty with one target per window"));
    }
    let n = windows.len() as f64;
    let mut grad = LstmParams::zeros(params.input_dim, params.hidden_size);
    let mut sum = 0.0;
    for (w, t) in windows.iter().zip(targets) {
        let (y, cache) = forward(params, w)?;
        let e = y - t;
        sum += e * e;
        backward(params, &cache, 2.0 * e / n, &mut grad);
    }
    Ok((grad, sum / n))
}

/// Largest relative error between analytic gradients and central
/// differences, `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(params: &LstmParams, windows: &[&[f64]], targets: &[f64], step: f64, floor: f64) -> Result<f64> {
    let (grad, _) = gradients(params, windows, targets)?;
    let analytic = grad.to_flat();
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut worst = 0.0f64;
    for k in 0..base.len() {
        flat[k] = base[k] + step;
        probe.set_flat(&flat);
        let up = loss(&probe, windows, targets)?;
        flat[k] = base[k] - step;
        probe.set_flat(&flat);
        let down = loss(&probe, windows, targets)?;
        flat[k] = base[k];
        let numeric = (up - down) / (2.0 * step);
        let err = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(floor);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Scaled sliding windows with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub lags: usize,
    pub n_features: usize,
    /// Each window is `lags × n_features`, time-major.
    pub windows: Vec<Vec<f64>>,
    /// Scaled target (feature 0 of the row after the window).
    pub targets: Vec<f64>,
    /// Source row of each target; window `i` covers
    /// `target_rows[i] - lags .. target_rows[i]`.
    pub target_rows: Vec<usize>,
    /// Candidate windows dropped for missing values.
    pub skipped: usize,
    pub scaler: Scaler,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn window_refs(&self) -> Vec<&[f64]> {
        self.windows.iter().map(Vec::as_slice).collect()
    }

    /// Windows whose target row lies in `rows`.
    pub fn select_targets(&self, rows: std::ops::Range<usize>) -> WindowedDataset {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| rows.contains(&self.target_rows[i])).collect();
        WindowedDataset {
            lags: self.lags,
            n_features: self.n_features,
            windows: keep.iter().map(|&i| self.windows[i].clone()).collect(),
            targets: keep.iter().map(|&i| self.targets[i]).collect(),
            target_rows: keep.iter().map(|&i| self.target_rows[i]).collect(),
            skipped: self.skipped,
            scaler: self.scaler.clone(),
        }
    }
}

/// Fits a min-max scaler to `columns` (training data only).
pub fn fit_scaler(columns: &[&UniformSeries]) -> Result<Scaler> {
    let cols: Vec<&[Option<f64>]> = columns.iter().map(|c| c.values()).collect();
    Scaler::fit(&cols)
}

/// Builds windows over aligned `columns`; column 0 is the target.
///
/// Window `i` covers rows `i .. i + lags` and targets row `i + lags`. A
/// candidate with any missing input or a missing target is skipped.
pub fn make_windows(columns: &[&UniformSeries], lags: usize, scaler: &Scaler) -> Result<WindowedDataset> {
    let Some(first) = columns.first() else {
        return Err(Error::invalid("no feature columns"));
    };
    if scaler.n_features() != columns.len() {
        return Err(Error::invalid("scaler feature count does not match the columns"));
    }
    let n = first.len();
    if columns
        .iter()
        .any(|c| c.len() != n || c.start() != first.start() || c.interval_secs() != first.interval_secs())
    {
        return Err(Error::invalid("feature columns are not aligned"));
    }
    if lags == 0 || n <= lags {
        return Err(Error::InsufficientData { needed: lags + 1, got: n });
    }
    let d = columns.len();
    let mut ds = WindowedDataset {
        lags,
        n_features: d,
        windows: Vec::new(),
        targets: Vec::new(),
        target_rows: Vec::new(),
        skipped: 0,
        scaler: scaler.clone(),
    };
    'outer: for target in lags..n {
        let Some(y) = first.get(target) else {
            ds.skipped += 1;
            continue;
        };
        let mut window = Vec::with_capacity(lags * d);
        for row in target - lags..target {
            for (j, col) in columns.iter().enumerate() {
                match col.get(row) {
                    Some(v) => window.push(scaler.apply(j, v)),
                    None => {
                        ds.skipped += 1;
                        continue 'outer;
                    }
                }
            }
        }
        ds.windows.push(window);
        ds.targets.push(scaler.apply(0, y));
        ds.target_rows.push(target);
    }
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss per epoch, in scaled units.
    pub losses: Vec<f64>,
    pub wall_secs: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..theta.len() {
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * grad[k];
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * grad[k] * grad[k];
            theta[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam over the dataset for `config.epochs` epochs.
pub fn train(config: &LstmConfig, dataset: &WindowedDataset) -> Result<(LstmParams, TrainHistory)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let started = Instant::now();
    let mut params = init_params(config, dataset.n_features)?;
    let mut flat = params.to_flat();
    let mut adam = Adam {
        m: vec![0.0; flat.len()],
        v: vec![0.0; flat.len()],
        t: 0,
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(config.seed);
    shuffler.set_stream(1);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffler);
        }
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let windows: Vec<&[f64]> = batch.iter().map(|&i| dataset.windows[i].as_slice()).collect();
            let targets: Vec<f64> = batch.iter().map(|&i| dataset.targets[i]).collect();
            let (grad, l) = gradients(&params, &windows, &targets).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch },
                other => other,
            })?;
            total += l * batch.len() as f64;
            adam.step(&mut flat, &grad.to_flat(), config.learning_rate);
            params.set_flat(&flat);
        }
        let mean = total / dataset.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        losses.push(mean);
    }
    Ok((
        params,
        TrainHistory {
            losses,
            wall_secs: started.elapsed().as_secs_f64(),
        },
    ))
}

/// Scaled-space predictions, one per window.
pub fn predict_scaled(params: &LstmParams, dataset: &WindowedDataset) -> Result<Vec<f64>> {
    dataset.windows.iter().map(|w| forward(params, w).map(|(y, _)| y)).collect()
}

/// Predictions in the target's physical units.
pub fn predict(params: &LstmParams, dataset: &WindowedDataset) -> Result<Vec<f64>> {
    Ok(predict_scaled(params, dataset)?
        .into_iter()
        .map(|y| dataset.scaler.invert(0, y))
        .collect())
}

/// A trained network with everything needed to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub format: String,
    pub version: u32,
    pub config: LstmConfig,
    pub scaler: Scaler,
    pub params: LstmParams,
    pub history: TrainHistory,
}

impl LstmModel {
    pub const FORMAT: &'static str = "windramp-lstm";
    pub const VERSION: u32 = 1;

    pub fn new(config: LstmConfig, scaler: Scaler, params: LstmParams, history: TrainHistory) -> Self {
        Self {
            format: Self::FORMAT.into(),
            version: Self::VERSION,
            config,
            scaler,
            params,
            history,
        }
    }

    /// Fits the scaler on `train` and trains on its windows.
    pub fn fit(config: &LstmConfig, columns: &[&UniformSeries]) -> Result<Self> {
        let scaler = fit_scaler(columns)?;
        let ds = make_windows(columns, config.lags, &scaler)?;
        let (params, history) = train(config, &ds)?;
        Ok(Self::new(config.clone(), scaler, params, history))
    }

    /// Predictions for the targets in rows `rows` of `columns`, which must use
    /// the training feature layout. Returns `(target_rows, predictions)`.
    pub fn predict_rows(&self, columns: &[&UniformSeries], rows: std::ops::Range<usize>) -> Result<(Vec<usize>, Vec<f64>)> {
        let ds = make_windows(columns, self.config.lags, &self.scaler)?.select_targets(rows);
        let preds = predict(&self.params, &ds)?;
        Ok((ds.target_rows, preds))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)?;
        if model.format != Self::FORMAT || model.version != Self::VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("unsupported model format {} v{}", model.format, model.version),
            });
        }
        Ok(model)
    }
}
