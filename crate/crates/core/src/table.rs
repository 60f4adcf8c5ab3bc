//! Regular-cadence CSV tables: an ISO-8601 UTC `timestamp` column followed
//! by numeric columns, with empty cells for missing values.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::series::UniformSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<(String, UniformSeries)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&UniformSeries> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub(crate) fn format_value(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes aligned series. All columns must share start, interval and length.
pub fn write_table<W: Write>(out: W, columns: &[(&str, &UniformSeries)]) -> Result<()> {
    let Some((_, first)) = columns.first() else {
        return Err(Error::invalid("a table needs at least one column"));
    };
    for (name, s) in columns {
        if s.start() != first.start() || s.interval_secs() != first.interval_secs() || s.len() != first.len() {
            return Err(Error::invalid(format!("column {name} is not aligned with the others")));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp"];
    header.extend(columns.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for i in 0..first.len() {
        let mut row = vec![format_timestamp(first.timestamp(i))];
        row.extend(columns.iter().map(|(_, s)| format_value(s.get(i))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

pub fn write_table_file(path: &Path, columns: &[(&str, &UniformSeries)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(std::io::BufWriter::new(file), columns)
}

/// Reads a table written by [`write_table`] (or any CSV with a
/// `timestamp` first column on a constant cadence).
pub fn read_table<R: Read>(input: R, label: &Path) -> Result<Table> {
    let fmt = |message: String| Error::Format {
        path: label.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("timestamp") || header.len() < 2 {
        return Err(fmt("expected a 'timestamp' column followed by value columns".into()));
    }
    let mut stamps = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); header.len() - 1];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts = DateTime::parse_from_rfc3339(&rec[0])
            .map_err(|e| fmt(format!("line {line}: bad timestamp '{}': {e}", &rec[0])))?
            .with_timezone(&Utc);
        stamps.push(ts);
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("").trim();
            col.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse().map_err(|_| fmt(format!("line {line}: bad number '{cell}' in {}", header[j + 1])))?)
            });
        }
    }
    if stamps.is_empty() {
        return Err(fmt("no data rows".into()));
    }
    let interval = if stamps.len() > 1 {
        (stamps[1] - stamps[0]).num_seconds()
    } else {
        600
    };
    if interval <= 0 || stamps.windows(2).any(|w| (w[1] - w[0]).num_seconds() != interval) {
        return Err(fmt("timestamps are not on a constant cadence; regularise the data first".into()));
    }
    let columns = header[1..]
        .iter()
        .zip(cols)
        .map(|(n, v)| Ok((n.clone(), UniformSeries::new(stamps[0], interval, v)?)))
        .collect::<Result<_>>()?;
    Ok(Table { columns })
}

pub fn read_table_file(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(std::io::BufReader::new(file), path)
}
