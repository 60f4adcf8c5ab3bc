//! SCADA ingestion: per-turbine CSV extracts → regular grid → farm-level
//! feature frame.
//!
//! Row accounting is exact: every data row the CSV reader yields is either
//! accepted or rejected with a reason, so `rows_read = accepted + rejected`.
//! Duplicated `(turbine, timestamp)` rows keep the first occurrence; the
//! rest are rejected as duplicates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::UniformSeries;
use crate::table::{self, Table};

/// Source headers for the canonical features plus file dialect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub turbine_id: Option<String>,
    #[serde(rename = "Ws_avg")]
    pub ws_avg: Option<String>,
    #[serde(rename = "Wa_avg")]
    pub wa_avg: Option<String>,
    #[serde(rename = "P_avg")]
    pub p_avg: String,
    #[serde(rename = "Ot_avg")]
    pub ot_avg: Option<String>,
    pub delimiter: char,
    /// `rfc3339`, or a chrono format string. Formats without an offset are
    /// read as UTC.
    pub timestamp_format: String,
    pub decimal_separator: char,
}

impl Default for ColumnMapping {
    /// The La Haute Borne open-data layout.
    fn default() -> Self {
        Self {
            timestamp: "Date_time".into(),
            turbine_id: Some("Wind_turbine_name".into()),
            ws_avg: Some("Ws_avg".into()),
            wa_avg: Some("Wa_avg".into()),
            p_avg: "P_avg".into(),
            ot_avg: Some("Ot_avg".into()),
            delimiter: ';',
            timestamp_format: "rfc3339".into(),
            decimal_separator: '.',
        }
    }
}

impl ColumnMapping {
    pub fn validate(&self) -> Result<()> {
        if self.timestamp.is_empty() || self.p_avg.is_empty() {
            return Err(Error::invalid("timestamp and P_avg column mappings are mandatory"));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::invalid("delimiter must be a single ASCII character"));
        }
        if self.decimal_separator == self.delimiter {
            return Err(Error::invalid("decimal separator and delimiter must differ"));
        }
        Ok(())
    }

    fn parse_timestamp(&self, raw: &str) -> Option<DateTime<Utc>> {
        let raw = raw.trim();
        if self.timestamp_format == "rfc3339" {
            return DateTime::parse_from_rfc3339(raw).ok().map(|t| t.with_timezone(&Utc));
        }
        if self.timestamp_format.contains("%z") || self.timestamp_format.contains("%:z") {
            DateTime::parse_from_str(raw, &self.timestamp_format)
                .ok()
                .map(|t| t.with_timezone(&Utc))
        } else {
            NaiveDateTime::parse_from_str(raw, &self.timestamp_format)
                .ok()
                .map(|t| t.and_utc())
        }
    }

    fn parse_number(&self, raw: &str) -> std::result::Result<Option<f64>, ()> {
        let raw = raw.trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
            return Ok(None);
        }
        let parsed = if self.decimal_separator == '.' {
            raw.parse::<f64>()
        } else {
            raw.replace(self.decimal_separator, ".").parse::<f64>()
        };
        match parsed {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(()),
        }
    }
}

/// How slots with some turbines missing are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AggregationPolicy {
    /// Any expected turbine missing makes `P_tot` missing.
    #[default]
    Strict,
    /// Sum whatever turbines reported.
    Available,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarmConfig {
    /// kW.
    pub rated_power: f64,
    /// Empty means "every turbine seen in the data".
    pub expected_turbines: BTreeSet<String>,
    pub cadence_secs: i64,
    /// Longest run of missing slots that is forward-filled.
    pub gap_fill_limit: usize,
    pub policy: AggregationPolicy,
}

impl Default for FarmConfig {
    fn default() -> Self {
        Self {
            rated_power: 8200.0,
            expected_turbines: BTreeSet::new(),
            cadence_secs: 600,
            gap_fill_limit: 3,
            policy: AggregationPolicy::Strict,
        }
    }
}

impl FarmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rated_power > 0.0) {
            return Err(Error::invalid(format!("rated_power must be positive, got {}", self.rated_power)));
        }
        if self.cadence_secs <= 0 {
            return Err(Error::invalid("cadence must be positive"));
        }
        Ok(())
    }
}

/// One accepted SCADA row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScadaRecord {
    pub turbine: String,
    pub timestamp: DateTime<Utc>,
    pub ws: Option<f64>,
    pub wa: Option<f64>,
    pub p: Option<f64>,
    pub ot: Option<f64>,
    /// Source line (1-based, header is line 1).
    pub line: u64,
}

impl ScadaRecord {
    fn same_values(&self, other: &ScadaRecord) -> bool {
        self.ws == other.ws && self.wa == other.wa && self.p == other.p && self.ot == other.ot
    }
}

/// Accepted records per turbine, in file order.
pub type ScadaRecords = BTreeMap<String, Vec<ScadaRecord>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub source: String,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TurbineCoverage {
    pub rows: usize,
    /// Share of grid slots with a present `P_avg` before gap filling.
    pub coverage_pct: f64,
}

/// Ingestion bookkeeping.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    /// The first [`IngestReport::MAX_EXAMPLES`] rejections.
    pub rejection_examples: Vec<Rejection>,
    pub turbines: BTreeMap<String, TurbineCoverage>,
    pub grid_conflicts: usize,
    pub gaps_filled: usize,
    pub gaps_left_missing: usize,
    pub span_start: Option<DateTime<Utc>>,
    pub span_end: Option<DateTime<Utc>>,
    pub over_rated_slots: usize,
}

impl IngestReport {
    pub const MAX_EXAMPLES: usize = 100;

    fn reject(&mut self, source: &str, line: u64, reason: impl Into<String>) {
        let reason = reason.into();
        self.rows_read += 1;
        self.rows_rejected += 1;
        let key = reason.split(':').next().unwrap_or(&reason).to_string();
        *self.rejected_by_reason.entry(key).or_default() += 1;
        if self.rejection_examples.len() < Self::MAX_EXAMPLES {
            self.rejection_examples.push(Rejection {
                source: source.to_string(),
                line,
                reason,
            });
        }
    }

    fn accept(&mut self, turbine: &str) {
        self.rows_read += 1;
        self.rows_accepted += 1;
        self.turbines.entry(turbine.to_string()).or_default().rows += 1;
    }
}

/// Turbine id used when the mapping has no turbine column.
pub const SINGLE_TURBINE: &str = "farm";

/// Parses one SCADA file, appending to `records` and `report`.
///
/// Malformed rows are rejected and counted; only a missing mandatory header
/// or a file without data rows is an error.
pub fn parse_scada_into<R: Read>(
    input: R,
    label: &str,
    mapping: &ColumnMapping,
    records: &mut ScadaRecords,
    report: &mut IngestReport,
) -> Result<()> {
    mapping.validate()?;
    let fmt = |message: String| Error::Format {
        path: label.into(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| fmt(format!("missing mandatory column '{name}' in header")));
    let opt = |name: &Option<String>| -> Result<Option<usize>> {
        match name {
            Some(n) => find(n).map(Some).ok_or_else(|| fmt(format!("mapped column '{n}' not in header"))),
            None => Ok(None),
        }
    };
    let ts_col = need(&mapping.timestamp)?;
    let p_col = need(&mapping.p_avg)?;
    let id_col = opt(&mapping.turbine_id)?;
    let ws_col = opt(&mapping.ws_avg)?;
    let wa_col = opt(&mapping.wa_avg)?;
    let ot_col = opt(&mapping.ot_avg)?;

    let mut seen: BTreeSet<(String, DateTime<Utc>)> = records
        .values()
        .flatten()
        .map(|r| (r.turbine.clone(), r.timestamp))
        .collect();
    let mut rows = 0usize;
    let mut raw = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                rows += 1;
                report.reject(label, line, format!("unreadable row: {e}"));
                continue;
            }
        }
        rows += 1;
        let line = raw.position().map_or(line, |p| p.line());
        if raw.len() != header.len() {
            report.reject(label, line, format!("wrong field count: {} (expected {})", raw.len(), header.len()));
            continue;
        }
        let Some(ts) = mapping.parse_timestamp(&raw[ts_col]) else {
            report.reject(label, line, format!("bad timestamp: '{}'", &raw[ts_col]));
            continue;
        };
        let turbine = match id_col {
            Some(c) if raw[c].trim().is_empty() => {
                report.reject(label, line, "missing turbine id");
                continue;
            }
            Some(c) => raw[c].trim().to_string(),
            None => SINGLE_TURBINE.to_string(),
        };
        let mut values = [None; 4];
        let mut bad = None;
        for (slot, col) in values.iter_mut().zip([ws_col, wa_col, Some(p_col), ot_col]) {
            if let Some(c) = col {
                match mapping.parse_number(&raw[c]) {
                    Ok(v) => *slot = v,
                    Err(()) => {
                        bad = Some(c);
                        break;
                    }
                }
            }
        }
        if let Some(c) = bad {
            report.reject(label, line, format!("bad number: '{}' in {}", &raw[c], header[c]));
            continue;
        }
        if !seen.insert((turbine.clone(), ts)) {
            report.reject(label, line, format!("duplicate: turbine {turbine} at {ts}"));
            continue;
        }
        report.accept(&turbine);
        let [ws, wa, p, ot] = values;
        records.entry(turbine.clone()).or_default().push(ScadaRecord {
            turbine,
            timestamp: ts,
            ws,
            wa,
            p,
            ot,
            line,
        });
    }
    if rows == 0 {
        return Err(fmt("no data rows".into()));
    }
    Ok(())
}

/// Parses one SCADA file from disk.
pub fn parse_scada(path: &Path, mapping: &ColumnMapping) -> Result<(ScadaRecords, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = ScadaRecords::new();
    let mut report = IngestReport::default();
    parse_scada_into(
        std::io::BufReader::new(file),
        &path.display().to_string(),
        mapping,
        &mut records,
        &mut report,
    )?;
    Ok((records, report))
}

/// Per-turbine columns on a shared grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TurbineColumns {
    pub ws: Vec<Option<f64>>,
    pub wa: Vec<Option<f64>>,
    pub p: Vec<Option<f64>>,
    pub ot: Vec<Option<f64>>,
}

impl TurbineColumns {
    fn with_len(n: usize) -> Self {
        Self {
            ws: vec![None; n],
            wa: vec![None; n],
            p: vec![None; n],
            ot: vec![None; n],
        }
    }

    fn columns_mut(&mut self) -> [&mut Vec<Option<f64>>; 4] {
        [&mut self.ws, &mut self.wa, &mut self.p, &mut self.ot]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurbineGrid {
    pub start: DateTime<Utc>,
    pub interval_secs: i64,
    pub len: usize,
    pub turbines: BTreeMap<String, TurbineColumns>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegularizeStats {
    pub grid_conflicts: usize,
    pub gaps_filled: usize,
    pub gaps_left_missing: usize,
    pub coverage_pct: BTreeMap<String, f64>,
}

impl IngestReport {
    pub fn absorb(&mut self, stats: &RegularizeStats, grid: &TurbineGrid) {
        self.grid_conflicts += stats.grid_conflicts;
        self.gaps_filled += stats.gaps_filled;
        self.gaps_left_missing += stats.gaps_left_missing;
        for (id, pct) in &stats.coverage_pct {
            self.turbines.entry(id.clone()).or_default().coverage_pct = *pct;
        }
        if grid.len > 0 {
            self.span_start = Some(grid.start);
            self.span_end = Some(grid.start + TimeDelta::seconds(grid.interval_secs * (grid.len as i64 - 1)));
        }
    }
}

/// Forward-fills runs of at most `limit` missing values that follow a
/// present value. Returns `(filled, left_missing)`.
pub fn forward_fill(values: &mut [Option<f64>], limit: usize) -> (usize, usize) {
    let (mut filled, mut left) = (0, 0);
    let mut i = 0;
    while i < values.len() {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < values.len() && values[i].is_none() {
            i += 1;
        }
        let run = i - start;
        match (start.checked_sub(1).and_then(|p| values[p]), run <= limit) {
            (Some(prev), true) => {
                values[start..i].fill(Some(prev));
                filled += run;
            }
            _ => left += run,
        }
    }
    (filled, left)
}

/// Snaps records to the nearest cadence slot (multiples of the cadence
/// since the Unix epoch) and forward-fills short gaps.
///
/// Two records for the same turbine and slot with differing values keep the
/// first (by timestamp, then source line) and count as a conflict.
pub fn regularize(records: &ScadaRecords, config: &FarmConfig) -> Result<(TurbineGrid, RegularizeStats)> {
    config.validate()?;
    let cadence = config.cadence_secs;
    let slot_of = |ts: DateTime<Utc>| {
        let secs = ts.timestamp();
        (secs + cadence / 2).div_euclid(cadence)
    };
    let all_slots = records.values().flatten().map(|r| slot_of(r.timestamp));
    let (Some(lo), Some(hi)) = (all_slots.clone().min(), all_slots.max()) else {
        return Err(Error::invalid("no records to regularise"));
    };
    let len = (hi - lo + 1) as usize;
    let start = DateTime::from_timestamp(lo * cadence, 0).ok_or_else(|| Error::invalid("grid start out of range"))?;

    let mut stats = RegularizeStats::default();
    let mut turbines = BTreeMap::new();
    for (id, recs) in records {
        let mut sorted: Vec<&ScadaRecord> = recs.iter().collect();
        sorted.sort_by_key(|r| (r.timestamp, r.line));
        let mut cols = TurbineColumns::with_len(len);
        let mut owner: Vec<Option<&ScadaRecord>> = vec![None; len];
        for r in sorted {
            let idx = (slot_of(r.timestamp) - lo) as usize;
            match owner[idx] {
                Some(first) => {
                    if !first.same_values(r) {
                        stats.grid_conflicts += 1;
                    }
                }
                None => {
                    owner[idx] = Some(r);
                    cols.ws[idx] = r.ws;
                    cols.wa[idx] = r.wa;
                    cols.p[idx] = r.p;
                    cols.ot[idx] = r.ot;
                }
            }
        }
        let present = cols.p.iter().filter(|v| v.is_some()).count();
        stats
            .coverage_pct
            .insert(id.clone(), 100.0 * present as f64 / len as f64);
        for col in cols.columns_mut() {
            let (f, l) = forward_fill(col, config.gap_fill_limit);
            stats.gaps_filled += f;
            stats.gaps_left_missing += l;
        }
        turbines.insert(id.clone(), cols);
    }
    Ok((
        TurbineGrid {
            start,
            interval_secs: cadence,
            len,
            turbines,
        },
        stats,
    ))
}

/// Farm-level features on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    /// kW.
    pub p_tot: UniformSeries,
    /// `100 * P_tot / rated_power`.
    pub pct_rated: UniformSeries,
    /// m/s.
    pub ws: UniformSeries,
    pub wa_sin: UniformSeries,
    pub wa_cos: UniformSeries,
    /// °C.
    pub ot: UniformSeries,
    pub rated_power: f64,
}

/// Column names used in feature CSV files.
pub const FEATURE_COLUMNS: [&str; 6] = ["P_tot", "pct_rated", "Ws", "Wa_sin", "Wa_cos", "Ot"];

/// Slack above 100 % of rated before a slot counts as over-rated.
pub const OVER_RATED_EPSILON_PCT: f64 = 1e-9;

fn circular_mean(degrees: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for d in degrees {
        let r = d.to_radians();
        s += r.sin();
        c += r.cos();
        n += 1;
    }
    let norm = s.hypot(c);
    (n > 0 && norm > 1e-9 * n as f64).then(|| (s / norm, c / norm))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.p_tot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_tot.is_empty()
    }

    pub fn columns(&self) -> [(&'static str, &UniformSeries); 6] {
        [
            (FEATURE_COLUMNS[0], &self.p_tot),
            (FEATURE_COLUMNS[1], &self.pct_rated),
            (FEATURE_COLUMNS[2], &self.ws),
            (FEATURE_COLUMNS[3], &self.wa_sin),
            (FEATURE_COLUMNS[4], &self.wa_cos),
            (FEATURE_COLUMNS[5], &self.ot),
        ]
    }

    /// Number of slots whose `pct_rated` exceeds 100 % (plus a tiny slack).
    pub fn over_rated_slots(&self) -> usize {
        self.pct_rated
            .values()
            .iter()
            .flatten()
            .filter(|&&v| v > 100.0 + OVER_RATED_EPSILON_PCT)
            .count()
    }

    /// Builds a frame from dense per-slot farm values; `wa_deg` in degrees.
    pub fn from_dense_columns(
        start: DateTime<Utc>,
        interval_secs: i64,
        rated_power: f64,
        p_tot: &[f64],
        ws: &[f64],
        wa_deg: &[f64],
        ot: &[f64],
    ) -> Result<Self> {
        let n = p_tot.len();
        if ws.len() != n || wa_deg.len() != n || ot.len() != n {
            return Err(Error::invalid("feature columns differ in length"));
        }
        let col = |v: Vec<Option<f64>>, unit: &str| UniformSeries::new(start, interval_secs, v).map(|s| s.with_unit(unit));
        let (sin, cos): (Vec<_>, Vec<_>) = wa_deg
            .iter()
            .map(|d| {
                let r = d.to_radians();
                (Some(r.sin()), Some(r.cos()))
            })
            .unzip();
        Ok(Self {
            p_tot: col(p_tot.iter().copied().map(Some).collect(), "kW")?,
            pct_rated: col(p_tot.iter().map(|p| Some(100.0 * p / rated_power)).collect(), "%")?,
            ws: col(ws.iter().copied().map(Some).collect(), "m/s")?,
            wa_sin: col(sin, "")?,
            wa_cos: col(cos, "")?,
            ot: col(ot.iter().copied().map(Some).collect(), "°C")?,
            rated_power,
        })
    }

    /// Sub-frame over `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FeatureFrame {
        FeatureFrame {
            p_tot: self.p_tot.slice(range.clone()),
            pct_rated: self.pct_rated.slice(range.clone()),
            ws: self.ws.slice(range.clone()),
            wa_sin: self.wa_sin.slice(range.clone()),
            wa_cos: self.wa_cos.slice(range.clone()),
            ot: self.ot.slice(range),
            rated_power: self.rated_power,
        }
    }

    /// Bucket means of every column at `target_secs`. `pct_rated` is
    /// recomputed from the resampled `P_tot`.
    pub fn resample(&self, target_secs: i64, min_count: usize) -> Result<Self> {
        let r = |s: &UniformSeries| crate::series::resample_mean(s, target_secs, min_count);
        let p_tot = r(&self.p_tot)?;
        Ok(Self {
            pct_rated: p_tot.map(|p| 100.0 * p / self.rated_power).with_unit("%"),
            p_tot,
            ws: r(&self.ws)?,
            wa_sin: r(&self.wa_sin)?,
            wa_cos: r(&self.wa_cos)?,
            ot: r(&self.ot)?,
            rated_power: self.rated_power,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        table::write_table(out, &self.columns())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        table::write_table_file(path, &self.columns())
    }

    /// Rebuilds a frame from a feature table. `rated_power` is only used
    /// when the table lacks a `pct_rated` column.
    pub fn from_table(table: &Table, rated_power: f64) -> Result<Self> {
        let p = table
            .column("P_tot")
            .ok_or_else(|| Error::invalid("feature table has no P_tot column"))?
            .clone();
        let missing = || p.map(|_| f64::NAN).values().iter().map(|_| None).collect::<Vec<_>>();
        let get = |name: &str, unit: &str| -> Result<UniformSeries> {
            Ok(match table.column(name) {
                Some(s) => s.clone(),
                None => UniformSeries::new(p.start(), p.interval_secs(), missing())?,
            }
            .with_unit(unit))
        };
        let pct_rated = match table.column("pct_rated") {
            Some(s) => s.clone(),
            None => p.map(|v| 100.0 * v / rated_power),
        };
        Ok(Self {
            pct_rated: pct_rated.with_unit("%"),
            ws: get("Ws", "m/s")?,
            wa_sin: get("Wa_sin", "")?,
            wa_cos: get("Wa_cos", "")?,
            ot: get("Ot", "°C")?,
            p_tot: p.with_unit("kW"),
            rated_power,
        })
    }
}

/// Sums turbine power and averages the weather columns per slot.
///
/// Under [`AggregationPolicy::Strict`] a slot where any expected turbine
/// lacks `P_avg` has missing `P_tot`. Wind direction is the circular mean,
/// stored as its unit vector `(sin, cos)`.
pub fn aggregate_farm(grid: &TurbineGrid, config: &FarmConfig) -> Result<FeatureFrame> {
    config.validate()?;
    let ids: Vec<&String> = if config.expected_turbines.is_empty() {
        grid.turbines.keys().collect()
    } else {
        config.expected_turbines.iter().collect()
    };
    if ids.is_empty() {
        return Err(Error::invalid("no turbines to aggregate"));
    }
    let empty = TurbineColumns::with_len(grid.len);
    let cols: Vec<&TurbineColumns> = ids.iter().map(|id| grid.turbines.get(*id).unwrap_or(&empty)).collect();

    let mut p_tot = Vec::with_capacity(grid.len);
    let mut ws = Vec::with_capacity(grid.len);
    let mut sin = Vec::with_capacity(grid.len);
    let mut cos = Vec::with_capacity(grid.len);
    let mut ot = Vec::with_capacity(grid.len);
    for i in 0..grid.len {
        let powers: Vec<Option<f64>> = cols.iter().map(|c| c.p[i]).collect();
        let any_missing = powers.iter().any(Option::is_none);
        let present: Vec<f64> = powers.into_iter().flatten().collect();
        p_tot.push(match config.policy {
            AggregationPolicy::Strict if any_missing => None,
            _ if present.is_empty() => None,
            _ => Some(present.iter().sum()),
        });
        ws.push(mean(cols.iter().filter_map(|c| c.ws[i])));
        ot.push(mean(cols.iter().filter_map(|c| c.ot[i])));
        let dir = circular_mean(cols.iter().filter_map(|c| c.wa[i]));
        sin.push(dir.map(|d| d.0));
        cos.push(dir.map(|d| d.1));
    }
    let series = |v: Vec<Option<f64>>, unit: &str| UniformSeries::new(grid.start, grid.interval_secs, v).map(|s| s.with_unit(unit));
    let p_tot = series(p_tot, "kW")?;
    Ok(FeatureFrame {
        pct_rated: p_tot.map(|p| 100.0 * p / config.rated_power).with_unit("%"),
        p_tot,
        ws: series(ws, "m/s")?,
        wa_sin: series(sin, "")?,
        wa_cos: series(cos, "")?,
        ot: series(ot, "°C")?,
        rated_power: config.rated_power,
    })
}

/// Parses every file, regularises and aggregates.
pub fn ingest_files(paths: &[&Path], mapping: &ColumnMapping, farm: &FarmConfig) -> Result<(FeatureFrame, IngestReport)> {
    let mut records = ScadaRecords::new();
    let mut report = IngestReport::default();
    for path in paths {
        let file = std::fs::File::open(path).map_err(|e| Error::io(*path, e))?;
        parse_scada_into(
            std::io::BufReader::new(file),
            &path.display().to_string(),
            mapping,
            &mut records,
            &mut report,
        )?;
    }
    let (grid, stats) = regularize(&records, farm)?;
    report.absorb(&stats, &grid);
    let frame = aggregate_farm(&grid, farm)?;
    report.over_rated_slots = frame.over_rated_slots();
    Ok((frame, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    const HEADER: &str = "Wind_turbine_name;Date_time;Ws_avg;Wa_avg;P_avg;Ot_avg";

    fn parse(text: &str) -> Result<(ScadaRecords, IngestReport)> {
        let mut records = ScadaRecords::new();
        let mut report = IngestReport::default();
        parse_scada_into(text.as_bytes(), "mem", &ColumnMapping::default(), &mut records, &mut report)?;
        Ok((records, report))
    }

    #[test]
    fn parses_a_row() {
        let text = format!("{HEADER}\nR80711;2013-01-07T00:20:00+01:00;7.2;233.0;512.5;11.3\n");
        let (recs, rep) = parse(&text).unwrap();
        let r = &recs["R80711"][0];
        assert_eq!((r.ws, r.wa, r.p, r.ot), (Some(7.2), Some(233.0), Some(512.5), Some(11.3)));
        assert_eq!(r.timestamp, Utc.with_ymd_and_hms(2013, 1, 6, 23, 20, 0).unwrap());
        assert_eq!((rep.rows_read, rep.rows_accepted, rep.rows_rejected), (1, 1, 0));
    }

    #[test]
    fn bad_rows_are_counted_not_fatal() {
        let text = format!(
            "{HEADER}\nR1;not-a-time;1;2;3;4\nR1;2013-01-07T00:20:00Z;1;2;x;4\nR1;2013-01-07T00:20:00Z;1;2;3\n\
             R1;2013-01-07T00:30:00Z;1;2;3;4\nR1;2013-01-07T00:30:00Z;9;9;9;9\n;2013-01-07T00:40:00Z;1;2;3;4\n"
        );
        let (recs, rep) = parse(&text).unwrap();
        assert_eq!(rep.rows_read, 6);
        assert_eq!(rep.rows_accepted, 1);
        assert_eq!(rep.rows_rejected, 5);
        assert_eq!(rep.rejected_by_reason["bad timestamp"], 1);
        assert_eq!(rep.rejected_by_reason["bad number"], 1);
        assert_eq!(rep.rejected_by_reason["wrong field count"], 1);
        assert_eq!(rep.rejected_by_reason["duplicate"], 1);
        assert_eq!(rep.rejected_by_reason["missing turbine id"], 1);
        assert_eq!(recs["R1"][0].p, Some(3.0));
        assert_eq!(rep.rejection_examples[0].line, 2);
    }

    #[test]
    fn header_only_and_missing_columns_are_errors() {
        let err = parse(&format!("{HEADER}\n")).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
        let err = parse("Wind_turbine_name;Date_time;Ws_avg\nR1;2013-01-07T00:20:00Z;1\n").unwrap_err();
        assert!(err.to_string().contains("P_avg"));
    }

    #[test]
    fn custom_dialect() {
        let mapping = ColumnMapping {
            timestamp: "time".into(),
            turbine_id: None,
            ws_avg: None,
            wa_avg: None,
            p_avg: "power".into(),
            ot_avg: None,
            delimiter: ';',
            timestamp_format: "%d/%m/%Y %H:%M".into(),
            decimal_separator: ',',
        };
        let mut recs = ScadaRecords::new();
        let mut rep = IngestReport::default();
        parse_scada_into("time;power\n07/01/2013 00:20;512,5\n".as_bytes(), "mem", &mapping, &mut recs, &mut rep).unwrap();
        let r = &recs[SINGLE_TURBINE][0];
        assert_eq!(r.p, Some(512.5));
        assert_eq!(r.timestamp, Utc.with_ymd_and_hms(2013, 1, 7, 0, 20, 0).unwrap());
    }

    fn records_with_gap(missing: &[usize], n: usize) -> ScadaRecords {
        let t0 = Utc.with_ymd_and_hms(2013, 1, 7, 0, 0, 0).unwrap();
        let recs = (0..n)
            .filter(|i| !missing.contains(i))
            .map(|i| ScadaRecord {
                turbine: "T".into(),
                timestamp: t0 + TimeDelta::minutes(10 * i as i64),
                ws: Some(5.0),
                wa: Some(180.0),
                p: Some(i as f64),
                ot: Some(10.0),
                line: i as u64 + 2,
            })
            .collect();
        BTreeMap::from([("T".to_string(), recs)])
    }

    #[test]
    fn gap_filling_limits() {
        let cfg = FarmConfig { gap_fill_limit: 3, ..Default::default() };
        let (grid, stats) = regularize(&records_with_gap(&[3, 4], 10), &cfg).unwrap();
        assert_eq!(grid.turbines["T"].p[3], Some(2.0));
        assert_eq!(grid.turbines["T"].p[4], Some(2.0));
        assert_eq!(stats.gaps_filled, 8);

        let (grid, stats) = regularize(&records_with_gap(&[2, 3, 4, 5, 6, 7, 8], 12), &cfg).unwrap();
        assert!(grid.turbines["T"].p[2..9].iter().all(Option::is_none));
        assert_eq!(stats.gaps_left_missing, 28);

        let cfg0 = FarmConfig { gap_fill_limit: 0, ..Default::default() };
        let (grid, _) = regularize(&records_with_gap(&[3, 4], 10), &cfg0).unwrap();
        let present: Vec<usize> = grid.turbines["T"].p.iter().enumerate().filter_map(|(i, v)| v.map(|_| i)).collect();
        assert_eq!(present, vec![0, 1, 2, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn snapping_and_conflicts() {
        let mut recs = records_with_gap(&[], 3);
        let t = recs["T"][1].timestamp + TimeDelta::minutes(2);
        let extra = ScadaRecord { timestamp: t, p: Some(99.0), line: 100, ..recs["T"][1].clone() };
        recs.get_mut("T").unwrap().push(extra);
        let (grid, stats) = regularize(&recs, &FarmConfig::default()).unwrap();
        assert_eq!(grid.len, 3);
        assert_eq!(grid.turbines["T"].p[1], Some(1.0));
        assert_eq!(stats.grid_conflicts, 1);
    }

    fn grid_of(powers: &[&[Option<f64>]], dirs: &[f64]) -> TurbineGrid {
        let len = powers[0].len();
        let turbines = powers
            .iter()
            .enumerate()
            .map(|(k, p)| {
                (
                    format!("T{k}"),
                    TurbineColumns {
                        ws: vec![Some(6.0 + k as f64); len],
                        wa: vec![dirs.get(k).copied(); len],
                        p: p.to_vec(),
                        ot: vec![Some(12.0); len],
                    },
                )
            })
            .collect();
        TurbineGrid {
            start: Utc.with_ymd_and_hms(2013, 1, 7, 0, 0, 0).unwrap(),
            interval_secs: 600,
            len,
            turbines,
        }
    }

    #[test]
    fn farm_totals_and_percent_rated() {
        let grid = grid_of(&[&[Some(1000.0)], &[Some(1200.0)], &[Some(900.0)], &[Some(1000.0)]], &[]);
        let f = aggregate_farm(&grid, &FarmConfig::default()).unwrap();
        assert_eq!(f.p_tot.get(0), Some(4100.0));
        assert_eq!(f.pct_rated.get(0), Some(50.0));
        assert_eq!(f.ws.get(0), Some(7.5));
        assert!(f.wa_sin.get(0).is_none());
    }

    #[test]
    fn circular_mean_wraps() {
        let grid = grid_of(&[&[Some(1.0)], &[Some(1.0)]], &[350.0, 10.0]);
        let f = aggregate_farm(&grid, &FarmConfig::default()).unwrap();
        assert!(f.wa_sin.get(0).unwrap().abs() < 1e-12);
        assert!((f.wa_cos.get(0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strict_and_available_policies() {
        let grid = grid_of(&[&[Some(1000.0), Some(5.0)], &[None, Some(6.0)]], &[]);
        let strict = aggregate_farm(&grid, &FarmConfig::default()).unwrap();
        assert_eq!(strict.p_tot.values(), &[None, Some(11.0)]);
        let avail = aggregate_farm(&grid, &FarmConfig { policy: AggregationPolicy::Available, ..Default::default() }).unwrap();
        assert_eq!(avail.p_tot.values(), &[Some(1000.0), Some(11.0)]);

        let cfg = FarmConfig {
            expected_turbines: ["T0".to_string(), "T9".to_string()].into(),
            ..Default::default()
        };
        assert!(aggregate_farm(&grid, &cfg).unwrap().p_tot.values().iter().all(Option::is_none));
        let empty = TurbineGrid { turbines: BTreeMap::new(), ..grid };
        assert!(aggregate_farm(&empty, &FarmConfig::default()).is_err());
    }

    #[test]
    fn over_rated_is_reported_not_clipped() {
        let grid = grid_of(&[&[Some(8300.0), Some(8200.0)]], &[]);
        let f = aggregate_farm(&grid, &FarmConfig::default()).unwrap();
        assert!(f.pct_rated.get(0).unwrap() > 100.0);
        assert_eq!(f.over_rated_slots(), 1);
    }

    #[test]
    fn forward_fill_runs() {
        let mut v = vec![None, Some(1.0), None, None, Some(2.0), None];
        assert_eq!(forward_fill(&mut v, 2), (3, 1));
        assert_eq!(v, vec![None, Some(1.0), Some(1.0), Some(1.0), Some(2.0), Some(2.0)]);
    }
}
