//! The run configuration file (TOML). Every field has a default, so an empty
//! file is a valid configuration; command-line flags override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detectors::{BinaryRampConfig, Definition};
use crate::error::{Error, Result};
use crate::eval::{EvalSettings, ModelSpec};
use crate::ingest::{ColumnMapping, FarmConfig};
use crate::lstm::Selection;
use crate::ramp::{ThresholdSpec, WaveletConfig};
use crate::series::SplitSpec;
use crate::synth::SynthConfig;

/// Target cadence for modelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Rate {
    /// Keep the 10-minute SCADA cadence.
    #[default]
    #[serde(rename = "10min")]
    TenMinute,
    #[serde(rename = "hourly")]
    Hourly,
}

impl Rate {
    pub fn secs(self) -> i64 {
        match self {
            Rate::TenMinute => 600,
            Rate::Hourly => 3600,
        }
    }

    /// Default largest wavelet scale: six hours of samples.
    pub fn default_lambda_max(self) -> usize {
        match self {
            Rate::TenMinute => 36,
            Rate::Hourly => 6,
        }
    }
}

impl std::str::FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "10min" => Ok(Rate::TenMinute),
            "hourly" => Ok(Rate::Hourly),
            _ => Err(Error::invalid(format!("unknown rate '{s}' (10min|hourly)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub paths: Vec<PathBuf>,
    pub mapping: ColumnMapping,
    pub farm: FarmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSection {
    pub rate: Rate,
    /// Present inputs needed per output bucket; all of them when unset.
    pub min_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletSection {
    pub lambda_min: usize,
    /// Defaults by rate when unset.
    pub lambda_max: Option<usize>,
    pub sign_correction: bool,
}

impl Default for WaveletSection {
    fn default() -> Self {
        Self {
            lambda_min: 2,
            lambda_max: None,
            sign_correction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub definitions: Vec<Definition>,
    pub params: BinaryRampConfig,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            definitions: Definition::ALL.to_vec(),
            params: BinaryRampConfig {
                delta_t: 6,
                p_val: 0.5 * 8200.0,
                p_rr: 0.5 * 8200.0 / 6.0,
                n_nam: 6,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every model and generator seed when set.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub ingest: IngestSection,
    pub resample: ResampleSection,
    pub wavelet: WaveletSection,
    pub threshold: ThresholdSpec,
    pub split: SplitSpec,
    pub horizon: usize,
    pub models: Vec<ModelSpec>,
    pub detect: DetectSection,
    pub synth: Option<SynthConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvalSettings::default();
        Self {
            seed: None,
            out: PathBuf::from("out"),
            ingest: IngestSection::default(),
            resample: ResampleSection::default(),
            wavelet: WaveletSection::default(),
            threshold: eval.threshold,
            split: eval.split,
            horizon: eval.horizon,
            models: eval.models,
            detect: DetectSection::default(),
            synth: None,
        }
    }
}

/// Command-line overrides; `None` keeps the file's value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub models: Vec<String>,
    pub rate: Option<Rate>,
    pub selection: Option<Selection>,
    pub lambda_max: Option<usize>,
    pub threshold_quantile: Option<f64>,
    pub test_fraction: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str, label: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format {
            path: label.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if !o.models.is_empty() {
            self.models = o.models.iter().map(|m| ModelSpec::from_name(m)).collect::<Result<_>>()?;
        }
        if let Some(rate) = o.rate {
            self.resample.rate = rate;
        }
        if let Some(sel) = o.selection {
            for m in &mut self.models {
                if let ModelSpec::Lstm(c) = m {
                    c.selection = sel;
                }
            }
        }
        if let Some(l) = o.lambda_max {
            self.wavelet.lambda_max = Some(l);
        }
        if let Some(q) = o.threshold_quantile {
            self.threshold = ThresholdSpec::Quantile(q);
        }
        if let Some(f) = o.test_fraction {
            self.split.test_fraction = f;
        }
        if let Some(seed) = self.seed {
            for m in &mut self.models {
                if let ModelSpec::Lstm(c) = m {
                    c.seed = seed;
                }
            }
            if let Some(s) = &mut self.synth {
                s.seed = seed;
            }
        }
        Ok(())
    }

    pub fn wavelet_config(&self) -> WaveletConfig {
        WaveletConfig {
            lambda_min: self.wavelet.lambda_min,
            lambda_max: self
                .wavelet
                .lambda_max
                .unwrap_or_else(|| self.resample.rate.default_lambda_max()),
            sign_correction: self.wavelet.sign_correction,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            wavelet: self.wavelet_config(),
            threshold: self.threshold,
            split: self.split,
            models: self.models.clone(),
            horizon: self.horizon,
        }
    }

    /// All problems at once, one per line.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        let mut check = |section: &str, r: Result<()>| {
            if let Err(e) = r {
                problems.push(format!("[{section}] {}", e.detail()));
            }
        };
        check("ingest.mapping", self.ingest.mapping.validate());
        check("ingest.farm", self.ingest.farm.validate());
        check("evaluation", self.eval_settings().validate());
        check("detect", self.detect.params.validate());
        if let Some(m) = self.resample.min_count {
            let ratio = (self.resample.rate.secs() / self.ingest.farm.cadence_secs.max(1)) as usize;
            if m == 0 || m > ratio.max(1) {
                check("resample", Err(Error::invalid(format!("min_count must be in 1..={}", ratio.max(1)))));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!("configuration has {} problem(s):\n  {}", problems.len(), problems.join("\n  "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::LstmConfig;

    #[test]
    fn empty_file_is_default() {
        let c = RunConfig::from_toml("", Path::new("x")).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.wavelet_config().lambda_max, 36);
        c.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig { seed: Some(9), ..Default::default() };
        c.models.push(ModelSpec::Lstm(LstmConfig { selection: Selection::Multivariate, ..Default::default() }));
        let text = c.to_toml();
        assert_eq!(RunConfig::from_toml(&text, Path::new("x")).unwrap(), c);
    }

    #[test]
    fn parses_sections() {
        let text = r#"
            seed = 3
            horizon = 1
            threshold = { quantile = 0.95 }
            [resample]
            rate = "hourly"
            [split]
            test_fraction = 0.25
            [[models]]
            kind = "arma"
            p = 2
            q = 0
            [[models]]
            kind = "lstm"
            hidden_size = 8
            selection = "multivariate"
        "#;
        let c = RunConfig::from_toml(text, Path::new("x")).unwrap();
        assert_eq!(c.models[0], ModelSpec::Arma { p: 2, q: 0 });
        assert!(matches!(&c.models[1], ModelSpec::Lstm(l) if l.hidden_size == 8 && l.epochs == LstmConfig::default().epochs));
        assert_eq!(c.wavelet_config().lambda_max, 6);
        assert!(RunConfig::from_toml("bogus = 1", Path::new("x")).is_err());
    }

    #[test]
    fn overrides_and_itemised_validation() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            models: vec!["lstm".into()],
            selection: Some(Selection::Multivariate),
            seed: Some(5),
            lambda_max: Some(10),
            ..Default::default()
        })
        .unwrap();
        assert!(matches!(&c.models[0], ModelSpec::Lstm(l) if l.seed == 5 && l.selection == Selection::Multivariate));
        assert_eq!(c.wavelet_config().lambda_max, 10);

        c.split.test_fraction = 2.0;
        c.ingest.farm.rated_power = -1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("2 problem(s)") && msg.contains("rated_power") && msg.contains("test fraction"), "{msg}");
        assert!(c.apply(&Overrides { models: vec!["prophet".into()], ..Default::default() }).is_err());
    }
}
