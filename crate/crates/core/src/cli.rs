//! Command-line frontend.
//!
//! Every subcommand writes its artifacts into a staging directory inside
//! `--out` and moves them into place only after everything succeeded, so a
//! failed run never leaves half-written files in the declared slots.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Overrides, Rate, RunConfig};
use crate::detectors::StepFlag;
use crate::error::{Error, Result};
use crate::eval::{evaluate_frame, present_span, EvalReport, FittedModel};
use crate::ingest::{ingest_files, FeatureFrame};
use crate::lstm::Selection;
use crate::ramp::{classify, extract_events, ramp_function};
use crate::series::chronological_split;
use crate::synth::{default_composite, gen_arma, gen_composite, gen_ramp_profile, SynthConfig, SynthKind};
use crate::table::{self, format_timestamp, format_value};

#[derive(Debug, Parser)]
#[command(name = "windramp", version, about = "Wind power ramp labelling, forecasting and evaluation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model to run (repeatable): persistence, arma, arima, lstm.
    #[arg(long = "model", global = true, value_name = "NAME")]
    models: Vec<String>,
    #[arg(long, global = true, value_parser = parse_rate, value_name = "10min|hourly")]
    rate: Option<Rate>,
    #[arg(long, global = true, value_parser = parse_selection, value_name = "univariate|multivariate")]
    selection: Option<Selection>,
    #[arg(long, global = true, value_name = "N")]
    lambda_max: Option<usize>,
    #[arg(long, global = true, value_name = "Q")]
    threshold_quantile: Option<f64>,
    #[arg(long, global = true, value_name = "F")]
    test_fraction: Option<f64>,
}

fn parse_rate(s: &str) -> std::result::Result<Rate, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_selection(s: &str) -> std::result::Result<Selection, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse SCADA files into a farm feature table.
    Ingest {
        /// SCADA files; defaults to `ingest.paths` from the config.
        inputs: Vec<PathBuf>,
    },
    /// Generate a synthetic dataset with ground-truth ramp events.
    Synth,
    /// Compute the ramp function, classes and events of a feature table.
    Label { input: PathBuf },
    /// Run the binary ramp definitions on a feature table.
    Detect { input: PathBuf },
    /// Fit the configured models on the training split.
    Fit { input: PathBuf },
    /// Forecast the test split with previously fitted models.
    Forecast {
        input: PathBuf,
        /// Directory of model files; defaults to `<out>/models`.
        #[arg(long, value_name = "DIR")]
        models_dir: Option<PathBuf>,
    },
    /// Fit, forecast and score every model; writes the report table.
    Evaluate {
        /// Feature table; a synthetic dataset is generated when omitted.
        input: Option<PathBuf>,
    },
    /// Re-render a report JSON as the CSV table.
    Report { input: PathBuf },
    /// Print the version.
    Version,
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code: 0 success, 1 runtime or configuration error, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        out: g.out.clone(),
        seed: g.seed,
        models: g.models.clone(),
        rate: g.rate,
        selection: g.selection,
        lambda_max: g.lambda_max,
        threshold_quantile: g.threshold_quantile,
        test_fraction: g.test_fraction,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    if let Command::Version = cli.command {
        println!("windramp {}", crate::VERSION);
        return Ok(());
    }
    let cfg = resolve_config(&cli.global)?;
    let mut stage = Stage::new(&cfg.out)?;
    stage.write("resolved_config.toml", &format!("# windramp {}\n{}", crate::VERSION, cfg.to_toml()))?;
    match &cli.command {
        Command::Ingest { inputs } => cmd_ingest(&cfg, inputs, &mut stage)?,
        Command::Synth => cmd_synth(&cfg, &mut stage)?,
        Command::Label { input } => cmd_label(&cfg, input, &mut stage)?,
        Command::Detect { input } => cmd_detect(&cfg, input, &mut stage)?,
        Command::Fit { input } => cmd_fit(&cfg, input, &mut stage)?,
        Command::Forecast { input, models_dir } => {
            let dir = models_dir.clone().unwrap_or_else(|| cfg.out.join("models"));
            cmd_forecast(&cfg, input, &dir, &mut stage)?
        }
        Command::Evaluate { input } => cmd_evaluate(&cfg, input.as_deref(), &mut stage)?,
        Command::Report { input } => cmd_report(input, &mut stage)?,
        Command::Version => unreachable!(),
    }
    stage.commit()
}

/// Artifacts written to a hidden directory, then renamed into `out`.
struct Stage {
    dir: tempfile::TempDir,
    out: PathBuf,
    names: Vec<String>,
}

impl Stage {
    fn new(out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let dir = tempfile::Builder::new()
            .prefix(".windramp-staging-")
            .tempdir_in(out)
            .map_err(|e| Error::io(out, e))?;
        Ok(Self {
            dir,
            out: out.to_path_buf(),
            names: Vec::new(),
        })
    }

    /// Path for a staged artifact; `name` may be `dir/file`.
    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let top = name.split('/').next().expect("non-empty name").to_string();
        if !self.names.contains(&top) {
            self.names.push(top);
        }
        let path = self.dir.path().join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(path)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn commit(self) -> Result<()> {
        for name in &self.names {
            let from = self.dir.path().join(name);
            let to = self.out.join(name);
            if to.is_dir() {
                std::fs::remove_dir_all(&to).map_err(|e| Error::io(&to, e))?;
            }
            std::fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
        Ok(())
    }
}

fn cmd_ingest(cfg: &RunConfig, inputs: &[PathBuf], stage: &mut Stage) -> Result<()> {
    let paths: Vec<&Path> = if inputs.is_empty() {
        cfg.ingest.paths.iter().map(PathBuf::as_path).collect()
    } else {
        inputs.iter().map(PathBuf::as_path).collect()
    };
    if paths.is_empty() {
        return Err(Error::invalid("no input files (pass paths or set ingest.paths)"));
    }
    let (frame, report) = ingest_files(&paths, &cfg.ingest.mapping, &cfg.ingest.farm)?;
    frame.write_csv_file(&stage.path("features.csv")?)?;
    stage.write_json("ingest_report.json", &report)?;
    println!(
        "ingested {} rows ({} accepted, {} rejected) into {} slots",
        report.rows_read,
        report.rows_accepted,
        report.rows_rejected,
        frame.len()
    );
    if report.over_rated_slots > 0 {
        eprintln!("warning: {} slots exceed rated power", report.over_rated_slots);
    }
    Ok(())
}

fn synth_config(cfg: &RunConfig) -> Result<SynthConfig> {
    match &cfg.synth {
        Some(s) => Ok(s.clone()),
        None => default_composite(cfg.seed.unwrap_or(42)),
    }
}

fn synth_frame(config: &SynthConfig, rated_power: f64) -> Result<(FeatureFrame, Vec<crate::synth::InjectedEvent>)> {
    match &config.kind {
        SynthKind::Composite(_) => gen_composite(config),
        SynthKind::RampProfile(_) => {
            let gt = gen_ramp_profile(config)?;
            Ok((power_only_frame(gt.series, rated_power)?, gt.events))
        }
        SynthKind::Arma(_) => Ok((power_only_frame(gen_arma(config)?, rated_power)?, Vec::new())),
    }
}

fn power_only_frame(p: crate::series::UniformSeries, rated_power: f64) -> Result<FeatureFrame> {
    let table = table::Table {
        columns: vec![("P_tot".to_string(), p)],
    };
    FeatureFrame::from_table(&table, rated_power)
}

fn cmd_synth(cfg: &RunConfig, stage: &mut Stage) -> Result<()> {
    let config = synth_config(cfg)?;
    let (frame, events) = synth_frame(&config, cfg.ingest.farm.rated_power)?;
    frame.write_csv_file(&stage.path("features.csv")?)?;
    stage.write_json("events.json", &events)?;
    println!(
        "generated {} samples with {} ramp events ({})",
        frame.len(),
        events.len(),
        crate::synth::GENERATOR
    );
    Ok(())
}

/// Reads a feature table and brings it to the configured rate.
fn load_frame(cfg: &RunConfig, path: &Path) -> Result<FeatureFrame> {
    let table = table::read_table_file(path)?;
    let frame = FeatureFrame::from_table(&table, cfg.ingest.farm.rated_power)?;
    let target = cfg.resample.rate.secs();
    let have = frame.p_tot.interval_secs();
    if have == target {
        return Ok(frame);
    }
    if target < have || target % have != 0 {
        return Err(Error::invalid(format!(
            "{}: cadence {have} s cannot be resampled to {target} s (try --rate hourly)",
            path.display()
        )));
    }
    let ratio = (target / have) as usize;
    frame.resample(target, cfg.resample.min_count.unwrap_or(ratio))
}

fn cmd_label(cfg: &RunConfig, input: &Path, stage: &mut Stage) -> Result<()> {
    let frame = load_frame(cfg, input)?;
    let power = &frame.p_tot;
    let ramp = ramp_function(power, &cfg.wavelet_config())?;
    let n_train = power.len() - cfg.split.test_len(power.len());
    let threshold = cfg.threshold.resolve(&ramp.slice(0..n_train))?;
    let labels = classify(&ramp, threshold);
    let events = extract_events(&labels.labels, power)?;

    let path = stage.path("labels.csv")?;
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["timestamp", "P_tot", "R_t", "class"])?;
    for i in 0..power.len() {
        w.write_record([
            format_timestamp(power.timestamp(i)),
            format_value(power.get(i)),
            format_value(ramp.values[i]),
            labels.labels[i].as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    #[derive(Serialize)]
    struct LabelSummary<'a> {
        threshold: f64,
        wavelet: crate::ramp::WaveletConfig,
        events: &'a [crate::ramp::RampEvent],
        dropped: &'a [crate::ramp::DroppedRun],
    }
    stage.write_json(
        "events.json",
        &LabelSummary {
            threshold,
            wavelet: ramp.config,
            events: &events.events,
            dropped: &events.dropped,
        },
    )?;
    println!("threshold {threshold:.4}: {} events ({} dropped)", events.events.len(), events.dropped.len());
    Ok(())
}

fn flag_cell(f: StepFlag) -> &'static str {
    match f {
        StepFlag::Ramp(Some(crate::ramp::Direction::Up)) => "up",
        StepFlag::Ramp(Some(crate::ramp::Direction::Down)) => "down",
        StepFlag::Ramp(None) => "ramp",
        StepFlag::NoRamp => "none",
        StepFlag::NotEvaluable => "",
    }
}

fn cmd_detect(cfg: &RunConfig, input: &Path, stage: &mut Stage) -> Result<()> {
    let frame = load_frame(cfg, input)?;
    let power = &frame.p_tot;
    let defs = &cfg.detect.definitions;
    let results = defs
        .iter()
        .map(|d| d.detect(power, &cfg.detect.params))
        .collect::<Result<Vec<_>>>()?;

    let path = stage.path("detections.csv")?;
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["timestamp", "P_tot"];
    header.extend(defs.iter().map(|d| d.name()));
    w.write_record(&header)?;
    for i in 0..power.len() {
        let mut row = vec![format_timestamp(power.timestamp(i)), format_value(power.get(i))];
        row.extend(results.iter().map(|r| flag_cell(r.flags[i]).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    #[derive(Serialize)]
    struct DetectSummary {
        definition: &'static str,
        ramp_count: usize,
        evaluable_count: usize,
        ramp_frequency: f64,
    }
    let summary: Vec<DetectSummary> = defs
        .iter()
        .zip(&results)
        .map(|(d, r)| DetectSummary {
            definition: d.name(),
            ramp_count: r.ramp_count(),
            evaluable_count: r.evaluable_count(),
            ramp_frequency: r.ramp_frequency(),
        })
        .collect();
    for s in &summary {
        println!("{:>9}: {} of {} steps ({:.2}%)", s.definition, s.ramp_count, s.evaluable_count, 100.0 * s.ramp_frequency);
    }
    stage.write_json("detect_summary.json", &summary)
}

/// The evaluated span of `frame` and its training length.
fn split_frame(cfg: &RunConfig, frame: &FeatureFrame) -> Result<(FeatureFrame, usize)> {
    let span = present_span(frame, &cfg.eval_settings());
    let frame = frame.slice(span);
    let (train, _) = chronological_split(&frame.p_tot, &cfg.split)?;
    let n_train = train.len();
    Ok((frame, n_train))
}

fn unique_slug(slug: String, taken: &mut Vec<String>) -> String {
    let mut name = slug.clone();
    let mut k = 2;
    while taken.contains(&name) {
        name = format!("{slug}-{k}");
        k += 1;
    }
    taken.push(name.clone());
    name
}

fn cmd_fit(cfg: &RunConfig, input: &Path, stage: &mut Stage) -> Result<()> {
    let frame = load_frame(cfg, input)?;
    let (frame, n_train) = split_frame(cfg, &frame)?;
    let mut taken = Vec::new();
    for spec in &cfg.models {
        let fitted = FittedModel::fit(spec, &frame, n_train)?;
        let name = unique_slug(fitted.slug(), &mut taken);
        fitted.save(&stage.path(&format!("models/{name}.json"))?)?;
        println!("fitted {} on {n_train} points -> models/{name}.json", fitted.name());
    }
    Ok(())
}

fn cmd_forecast(cfg: &RunConfig, input: &Path, models_dir: &Path, stage: &mut Stage) -> Result<()> {
    let frame = load_frame(cfg, input)?;
    let (frame, n_train) = split_frame(cfg, &frame)?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(models_dir)
        .map_err(|e| Error::io(models_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::invalid(format!("no model files in {}", models_dir.display())));
    }
    let mut columns = Vec::new();
    for path in &entries {
        let model = FittedModel::load(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
        columns.push((stem, model.rolling(&frame, n_train, cfg.horizon)?));
    }
    let path = stage.path("forecasts.csv")?;
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["timestamp".to_string(), "actual".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for (k, t) in (n_train..frame.len()).enumerate() {
        let mut row = vec![format_timestamp(frame.p_tot.timestamp(t)), format_value(frame.p_tot.get(t))];
        row.extend(columns.iter().map(|(_, v)| format_value(Some(v[k]))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!("{} forecasts from {} models", frame.len() - n_train, columns.len());
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, input: Option<&Path>, stage: &mut Stage) -> Result<()> {
    let frame = match input {
        Some(path) => load_frame(cfg, path)?,
        None => {
            let (frame, _) = synth_frame(&synth_config(cfg)?, cfg.ingest.farm.rated_power)?;
            let target = cfg.resample.rate.secs();
            if frame.p_tot.interval_secs() == target {
                frame
            } else {
                let ratio = (target / frame.p_tot.interval_secs()) as usize;
                frame.resample(target, cfg.resample.min_count.unwrap_or(ratio))?
            }
        }
    };
    let ev = evaluate_frame(&frame, &cfg.eval_settings())?;
    let csv = ev.report.to_csv_string()?;
    stage.write("report.csv", &csv)?;
    let mut json = ev.report.to_json()?;
    json.push('\n');
    stage.write("report.json", &json)?;
    let mut taken = Vec::new();
    for (plot, row) in ev.plots.iter().zip(&ev.report.rows) {
        let slug = format!("{}-{}", row.model.to_ascii_lowercase(), row.selection.to_ascii_lowercase());
        let name = unique_slug(slug, &mut taken);
        plot.write_csv_file(&stage.path(&format!("plots/{name}.csv"))?)?;
    }
    print!("{csv}");
    Ok(())
}

fn cmd_report(input: &Path, stage: &mut Stage) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let report = EvalReport::from_json(&text).map_err(|e| Error::Format {
        path: input.to_path_buf(),
        message: e.to_string(),
    })?;
    let report = EvalReport::new(report.rows)?;
    let csv = report.to_csv_string()?;
    stage.write("report.csv", &csv)?;
    print!("{csv}");
    Ok(())
}
