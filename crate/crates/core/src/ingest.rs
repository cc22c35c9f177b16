//! Tick CSV reader and writer.
//!
//! Rows are `time,price,shares`, comma separated, with an optional header.
//! `time` is either seconds (fractional allowed) or `HH:MM:SS[.fff]`; the
//! latter is resolved against a calendar date (UTC midnight), or taken as
//! seconds after midnight when no date is given.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveTime, Timelike};

use crate::error::{Error, Result};
use crate::measure::Tick;

fn data_err(line: u64, message: impl Into<String>) -> Error {
    Error::Data {
        line,
        message: message.into(),
    }
}

fn parse_time(field: &str, date: Option<NaiveDate>) -> Option<f64> {
    if let Ok(v) = field.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let tod = NaiveTime::parse_from_str(field, "%H:%M:%S%.f").ok()?;
    let secs = tod.num_seconds_from_midnight() as f64 + tod.nanosecond() as f64 * 1e-9;
    let base = date.map_or(0.0, |d| {
        d.and_hms_opt(0, 0, 0)
            .expect("midnight")
            .and_utc()
            .timestamp() as f64
    });
    Some(base + secs)
}

fn looks_like_header(fields: &[&str]) -> bool {
    fields
        .iter()
        .any(|f| f.chars().any(|c| c.is_ascii_alphabetic()) && f.parse::<f64>().is_err())
        && fields
            .first()
            .is_some_and(|f| parse_time(f, None).is_none())
}

/// Parses a tick stream, enforcing non-decreasing time.
pub fn parse_csv<R: Read>(reader: R, date: Option<NaiveDate>) -> Result<Vec<Tick>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut ticks: Vec<Tick> = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            if looks_like_header(&fields) {
                continue;
            }
        }
        if fields.len() != 3 {
            return Err(data_err(
                line,
                format!(
                    "expected 3 columns (time,price,shares), found {}",
                    fields.len()
                ),
            ));
        }
        let t = parse_time(fields[0], date)
            .ok_or_else(|| data_err(line, format!("malformed time '{}'", fields[0])))?;
        let p: f64 = fields[1]
            .parse()
            .map_err(|_| data_err(line, format!("malformed price '{}'", fields[1])))?;
        let dv: f64 = fields[2]
            .parse()
            .map_err(|_| data_err(line, format!("malformed shares '{}'", fields[2])))?;
        let tick = Tick::new(t, p, dv).map_err(|e| data_err(line, e.to_string()))?;
        if let Some(prev) = ticks.last() {
            if tick.t < prev.t {
                return Err(data_err(
                    line,
                    format!(
                        "time {} goes backwards (previous row at {})",
                        tick.t, prev.t
                    ),
                ));
            }
        }
        ticks.push(tick);
    }
    Ok(ticks)
}

/// Reads from a file, or from stdin when `path` is `-`.
pub fn read_path(path: &str, date: Option<NaiveDate>) -> Result<Vec<Tick>> {
    if path == "-" {
        parse_csv(io::stdin().lock(), date)
    } else {
        let file = File::open(Path::new(path)).map_err(|e| Error::Io(format!("{path}: {e}")))?;
        parse_csv(BufReader::new(file), date)
    }
}

/// Writes ticks with a header, using the shortest representation that
/// parses back to the same `f64`.
pub fn write_csv<W: Write>(mut w: W, ticks: &[Tick]) -> Result<()> {
    writeln!(w, "time,price,shares")?;
    for t in ticks {
        writeln!(w, "{},{},{}", t.t, t.p, t.dv)?;
    }
    w.flush()?;
    Ok(())
}
