//! Forecast scoring and Table-5-shaped evaluation reports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::FeatureFrame;
use crate::linear::{fit_arima, fit_arma, timed, ArmaModel};
use crate::lstm::{LstmConfig, LstmModel, Selection};
use crate::ramp::{classify, ramp_function, RampClass, ThresholdSpec, WaveletConfig};
use crate::series::{chronological_split, SplitSpec, UniformSeries};
use crate::table::{format_timestamp, format_value};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Pairs scored.
    pub n: usize,
    /// Pairs skipped because the actual value was missing.
    #[serde(default)]
    pub excluded: usize,
}

/// MAE and RMSE over pairs with a present actual value.
pub fn point_metrics(pred: &[f64], actual: &[Option<f64>]) -> Result<Metrics> {
    if pred.len() != actual.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} actual values",
            pred.len(),
            actual.len()
        )));
    }
    let (mut abs, mut sq, mut n) = (0.0, 0.0, 0usize);
    for (p, a) in pred.iter().zip(actual) {
        let Some(a) = a else { continue };
        if !p.is_finite() {
            return Err(Error::NonFinite(format!("prediction {p}")));
        }
        let e = p - a;
        abs += e.abs();
        sq += e * e;
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("no scoreable prediction/actual pairs"));
    }
    Ok(Metrics {
        mae: abs / n as f64,
        rmse: (sq / n as f64).sqrt(),
        n,
        excluded: actual.len() - n,
    })
}

/// Metrics per ramp class; an empty class is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampConditionedMetrics {
    pub up: Option<Metrics>,
    pub down: Option<Metrics>,
    pub none: Option<Metrics>,
}

impl RampConditionedMetrics {
    pub fn get(&self, class: RampClass) -> Option<&Metrics> {
        match class {
            RampClass::Up => self.up.as_ref(),
            RampClass::Down => self.down.as_ref(),
            RampClass::NoRamp => self.none.as_ref(),
        }
    }

    pub fn scored(&self) -> usize {
        [self.up, self.down, self.none].iter().flatten().map(|m| m.n).sum()
    }
}

/// Partitions the scored pairs by the label of the actual value.
pub fn conditioned_metrics(pred: &[f64], actual: &[Option<f64>], labels: &[RampClass]) -> Result<RampConditionedMetrics> {
    if pred.len() != actual.len() || labels.len() != actual.len() {
        return Err(Error::invalid("predictions, actuals and labels must be aligned"));
    }
    let class = |c: RampClass| -> Result<Option<Metrics>> {
        let (p, a): (Vec<f64>, Vec<Option<f64>>) = pred
            .iter()
            .zip(actual)
            .zip(labels)
            .filter(|&((_, a), l)| *l == c && a.is_some())
            .map(|((p, a), _)| (*p, *a))
            .unzip();
        if p.is_empty() {
            Ok(None)
        } else {
            point_metrics(&p, &a).map(Some)
        }
    };
    Ok(RampConditionedMetrics {
        up: class(RampClass::Up)?,
        down: class(RampClass::Down)?,
        none: class(RampClass::NoRamp)?,
    })
}

/// Forecast horizon bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonCategory {
    /// 2 to 9 hours.
    VeryShort,
    /// Above 9 up to 72 hours.
    Short,
    /// Above 72 hours up to 7 days.
    Medium,
}

impl HorizonCategory {
    const HOUR: i64 = 3600;

    /// `None` below two hours or beyond a week. Band edges use the upper
    /// ends of the overlapping published ranges.
    pub fn of(horizon_secs: i64) -> Option<Self> {
        match horizon_secs {
            s if s < 2 * Self::HOUR => None,
            s if s <= 9 * Self::HOUR => Some(HorizonCategory::VeryShort),
            s if s <= 72 * Self::HOUR => Some(HorizonCategory::Short),
            s if s <= 168 * Self::HOUR => Some(HorizonCategory::Medium),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HorizonCategory::VeryShort => "very-short",
            HorizonCategory::Short => "short",
            HorizonCategory::Medium => "medium",
        }
    }
}

/// One model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub sample_rate: String,
    pub selection: String,
    pub lags: Option<usize>,
    pub fit_secs: f64,
    pub forecast_secs: f64,
    pub train: Option<Metrics>,
    pub test: Metrics,
    pub ramp: RampConditionedMetrics,
    pub horizon_steps: usize,
    pub horizon_category: Option<HorizonCategory>,
    pub threshold: f64,
    pub wavelet: WaveletConfig,
    pub config_fingerprint: String,
}

impl ReportRow {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.model.trim().is_empty() {
            problems.push("model name is empty");
        }
        if self.sample_rate.trim().is_empty() {
            problems.push("sample rate is empty");
        }
        if self.selection.trim().is_empty() {
            problems.push("data selection is empty");
        }
        if !(self.fit_secs >= 0.0 && self.forecast_secs >= 0.0) {
            problems.push("timings must be non-negative");
        }
        if self.test.n == 0 {
            problems.push("test metrics are empty");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!("report row '{}': {}", self.model, problems.join("; "))))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub rows: Vec<ReportRow>,
}

/// The CSV header, in order.
pub const REPORT_COLUMNS: [&str; 16] = [
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

/// Whole seconds as `mm:ss`, truncating fractions.
pub fn format_mmss(secs: f64) -> String {
    let total = if secs.is_finite() && secs > 0.0 { secs.floor() as u64 } else { 0 };
    format!("{:02}:{:02}", total / 60, total % 60)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl EvalReport {
    pub fn new(rows: Vec<ReportRow>) -> Result<Self> {
        for r in &rows {
            r.validate()?;
        }
        Ok(Self {
            version: crate::VERSION.to_string(),
            rows,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            let m = |c: Option<&Metrics>, rmse: bool| cell(c.map(|m| if rmse { m.rmse } else { m.mae }));
            w.write_record([
                r.model.clone(),
                r.sample_rate.clone(),
                r.selection.clone(),
                r.lags.map(|l| l.to_string()).unwrap_or_default(),
                format_mmss(r.fit_secs),
                format_mmss(r.forecast_secs),
                m(r.train.as_ref(), true),
                m(Some(&r.test), true),
                m(r.train.as_ref(), false),
                m(Some(&r.test), false),
                m(r.ramp.up.as_ref(), true),
                m(r.ramp.up.as_ref(), false),
                m(r.ramp.down.as_ref(), true),
                m(r.ramp.down.as_ref(), false),
                m(r.ramp.none.as_ref(), true),
                m(r.ramp.none.as_ref(), false),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Model to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Persistence,
    Arma {
        #[serde(default = "default_p")]
        p: usize,
        #[serde(default = "default_q")]
        q: usize,
    },
    Arima {
        #[serde(default = "default_p")]
        p: usize,
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_q")]
        q: usize,
    },
    Lstm(LstmConfig),
}

fn default_p() -> usize {
    3
}
fn default_d() -> usize {
    1
}
fn default_q() -> usize {
    1
}

impl ModelSpec {
    pub fn display_name(&self) -> &'static str {
        match self {
            ModelSpec::Persistence => "Persistence",
            ModelSpec::Arma { .. } => "ARMA",
            ModelSpec::Arima { .. } => "ARIMA",
            ModelSpec::Lstm(_) => "LSTM-RNN",
        }
    }

    /// Parses a command-line model name into its default settings.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "persistence" => Ok(ModelSpec::Persistence),
            "arma" => Ok(ModelSpec::Arma { p: 3, q: 1 }),
            "arima" => Ok(ModelSpec::Arima { p: 3, d: 1, q: 1 }),
            "lstm" | "lstm-rnn" => Ok(ModelSpec::Lstm(LstmConfig::default())),
            _ => Err(Error::invalid(format!(
                "unknown model '{name}' (persistence|arma|arima|lstm)"
            ))),
        }
    }

    pub fn lags(&self) -> usize {
        match self {
            ModelSpec::Persistence => 1,
            ModelSpec::Arma { p, .. } | ModelSpec::Arima { p, .. } => *p,
            ModelSpec::Lstm(c) => c.lags,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Lstm(c) => c.validate(),
            ModelSpec::Arima { d, .. } if *d == 0 => Err(Error::invalid("ARIMA needs d >= 1; use arma for d = 0")),
            _ => Ok(()),
        }
    }
}

/// Everything that shapes an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub wavelet: WaveletConfig,
    pub threshold: ThresholdSpec,
    pub split: SplitSpec,
    pub models: Vec<ModelSpec>,
    /// Steps ahead for rolling forecasts. LSTM runs support 1 only.
    pub horizon: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            wavelet: WaveletConfig::default(),
            threshold: ThresholdSpec::default(),
            split: SplitSpec::default(),
            models: vec![
                ModelSpec::Persistence,
                ModelSpec::Arma { p: 3, q: 1 },
                ModelSpec::Arima { p: 3, d: 1, q: 1 },
                ModelSpec::Lstm(LstmConfig::default()),
            ],
            horizon: 1,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = [self.wavelet.validate(), self.threshold.validate(), self.split.validate()]
            .into_iter()
            .chain(self.models.iter().map(ModelSpec::validate))
            .filter_map(|r| r.err().map(|e| e.detail()))
            .collect();
        for m in &self.models {
            if matches!(m, ModelSpec::Lstm(_)) && self.horizon != 1 {
                problems.push("LSTM runs only support horizon = 1".into());
            }
        }
        if self.models.is_empty() {
            problems.push("no models configured".into());
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialise");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// "10 min", "Hourly", otherwise minutes or seconds.
pub fn sample_rate_label(interval_secs: i64) -> String {
    match interval_secs {
        3600 => "Hourly".into(),
        s if s % 60 == 0 => format!("{} min", s / 60),
        s => format!("{s} s"),
    }
}

/// Per-run series for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub model: String,
    pub actual: UniformSeries,
    pub predicted: Vec<f64>,
    pub ramp: Vec<Option<f64>>,
    pub labels: Vec<RampClass>,
}

impl PlotData {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "actual", "predicted", "R_t", "class"])?;
        for i in 0..self.actual.len() {
            w.write_record([
                format_timestamp(self.actual.timestamp(i)),
                format_value(self.actual.get(i)),
                format_value(Some(self.predicted[i])),
                format_value(self.ramp[i]),
                self.labels[i].as_str().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<plot>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Outcome of [`evaluate_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub plots: Vec<PlotData>,
    /// Rows of the input frame that were used (the longest span where every
    /// needed column is present).
    pub span: std::ops::Range<usize>,
    pub n_train: usize,
    pub threshold: f64,
}

/// A fitted forecaster; also the on-disk model file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Persistence,
    Linear(ArmaModel),
    Lstm(LstmModel),
}

/// Rolling `h`-step-ahead forecasts of `all[from..]` from a fixed model.
fn rolling_linear(model: &ArmaModel, all: &[f64], from: usize, h: usize) -> Result<Vec<f64>> {
    let needed = model.min_history().max(1) + h - 1;
    if from < needed {
        return Err(Error::InsufficientData { needed, got: from });
    }
    if h == 1 {
        return model.one_step_predictions(all, from);
    }
    (from..all.len())
        .map(|t| Ok(*model.forecast(&all[..t + 1 - h], h)?.last().expect("h >= 1")))
        .collect()
}

impl FittedModel {
    /// Fits `spec` on the first `n_train` rows of `frame`.
    pub fn fit(spec: &ModelSpec, frame: &FeatureFrame, n_train: usize) -> Result<Self> {
        let train = frame.p_tot.slice(0..n_train);
        match spec {
            ModelSpec::Persistence => Ok(FittedModel::Persistence),
            ModelSpec::Arma { p, q } => Ok(FittedModel::Linear(fit_arma(&train.dense()?, *p, *q)?)),
            ModelSpec::Arima { p, d, q } => Ok(FittedModel::Linear(fit_arima(&train.dense()?, *p, *d, *q)?)),
            ModelSpec::Lstm(cfg) => {
                let cols: Vec<UniformSeries> = cfg.selection.columns(frame).iter().map(|c| c.slice(0..n_train)).collect();
                let refs: Vec<&UniformSeries> = cols.iter().collect();
                Ok(FittedModel::Lstm(LstmModel::fit(cfg, &refs)?))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FittedModel::Persistence => "Persistence",
            FittedModel::Linear(m) if m.order.d > 0 => "ARIMA",
            FittedModel::Linear(_) => "ARMA",
            FittedModel::Lstm(_) => "LSTM-RNN",
        }
    }

    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        match self {
            FittedModel::Lstm(m) => format!("lstm-{}", m.config.selection.as_str()),
            other => other.name().to_ascii_lowercase(),
        }
    }

    pub fn lags(&self) -> usize {
        match self {
            FittedModel::Persistence => 1,
            FittedModel::Linear(m) => m.order.p,
            FittedModel::Lstm(m) => m.config.lags,
        }
    }

    pub fn selection(&self) -> Selection {
        match self {
            FittedModel::Lstm(m) => m.config.selection,
            _ => Selection::Univariate,
        }
    }

    /// Rolling `horizon`-step forecasts for rows `from..frame.len()`, each
    /// using only rows up to `t - horizon`. The used columns of `frame` must
    /// be fully present.
    pub fn rolling(&self, frame: &FeatureFrame, from: usize, horizon: usize) -> Result<Vec<f64>> {
        let n = frame.len();
        match self {
            FittedModel::Persistence => {
                if from < horizon {
                    return Err(Error::InsufficientData { needed: horizon, got: from });
                }
                let power = frame.p_tot.dense()?;
                Ok((from..n).map(|t| power[t - horizon]).collect())
            }
            FittedModel::Linear(m) => rolling_linear(m, &frame.p_tot.dense()?, from, horizon),
            FittedModel::Lstm(m) => {
                if horizon != 1 {
                    return Err(Error::invalid("LSTM forecasts are one-step only"));
                }
                let (rows, preds) = m.predict_rows(&m.config.selection.columns(frame), from..n)?;
                if rows.len() != n - from {
                    return Err(Error::InsufficientData { needed: n - from, got: rows.len() });
                }
                Ok(preds)
            }
        }
    }

    /// In-sample predictions over `train`, `None` during warm-up.
    pub fn in_sample(&self, train: &FeatureFrame, horizon: usize) -> Result<Vec<Option<f64>>> {
        let n = train.len();
        let warmup = match self {
            FittedModel::Persistence => horizon,
            FittedModel::Linear(m) => m.min_history().max(m.order.p + m.order.d).max(1) + horizon - 1,
            FittedModel::Lstm(m) => m.config.lags,
        }
        .min(n);
        let mut out = vec![None; warmup];
        out.extend(self.rolling(train, warmup, horizon)?.into_iter().map(Some));
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Longest span where every column the configured models need is present.
pub fn present_span(frame: &FeatureFrame, settings: &EvalSettings) -> std::ops::Range<usize> {
    let multivariate = settings
        .models
        .iter()
        .any(|m| matches!(m, ModelSpec::Lstm(c) if c.selection == Selection::Multivariate));
    let cols = if multivariate {
        Selection::Multivariate.columns(frame)
    } else {
        Selection::Univariate.columns(frame)
    };
    crate::series::longest_run((0..frame.len()).map(|i| cols.iter().all(|c| c.get(i).is_some())))
}

/// Splits, labels and scores every configured model on `frame`.
///
/// Ramp labels come from the ramp function of the actual power over the
/// whole evaluated span, thresholded with `θ` resolved on the training
/// part only.
pub fn evaluate_frame(frame: &FeatureFrame, settings: &EvalSettings) -> Result<Evaluation> {
    settings.validate()?;
    let span = present_span(frame, settings);
    let frame = frame.slice(span.clone());
    let power = frame.p_tot.clone();
    let (train, test) = chronological_split(&power, &settings.split)?;
    let n_train = train.len();
    if test.is_empty() {
        return Err(Error::InsufficientData { needed: 2, got: power.len() });
    }
    let ramp = ramp_function(&power, &settings.wavelet)?;
    let threshold = settings.threshold.resolve(&ramp.slice(0..n_train))?;
    let labels = classify(&ramp, threshold).labels;
    let test_labels = &labels[n_train..];
    let fingerprint = settings.fingerprint();

    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for spec in &settings.models {
        let (fitted, fit_t) = timed(|| FittedModel::fit(spec, &frame, n_train));
        let fitted = fitted?;
        let (test_pred, fc_t) = timed(|| fitted.rolling(&frame, n_train, settings.horizon));
        let test_pred = test_pred?;
        let train_pred = fitted.in_sample(&frame.slice(0..n_train), settings.horizon)?;
        let train_pairs: (Vec<f64>, Vec<Option<f64>>) = train_pred
            .iter()
            .zip(train.values())
            .filter_map(|(p, a)| p.map(|p| (p, *a)))
            .unzip();
        let train_metrics = if train_pairs.0.is_empty() {
            None
        } else {
            Some(point_metrics(&train_pairs.0, &train_pairs.1)?)
        };
        rows.push(ReportRow {
            model: spec.display_name().into(),
            sample_rate: sample_rate_label(power.interval_secs()),
            selection: fitted.selection().display().into(),
            lags: Some(fitted.lags()),
            fit_secs: fit_t.as_secs_f64(),
            forecast_secs: fc_t.as_secs_f64(),
            train: train_metrics,
            test: point_metrics(&test_pred, test.values())?,
            ramp: conditioned_metrics(&test_pred, test.values(), test_labels)?,
            horizon_steps: settings.horizon,
            horizon_category: HorizonCategory::of(settings.horizon as i64 * power.interval_secs()),
            threshold,
            wavelet: settings.wavelet,
            config_fingerprint: fingerprint.clone(),
        });
        plots.push(PlotData {
            model: spec.display_name().into(),
            actual: test.clone(),
            predicted: test_pred,
            ramp: ramp.values[n_train..].to_vec(),
            labels: test_labels.to_vec(),
        });
    }
    Ok(Evaluation {
        report: EvalReport::new(rows)?,
        plots,
        span,
        n_train,
        threshold,
    })
}
