//! Candle files: CSV with header `timestamp,open,high,low,close`.
//!
//! Timestamps are ISO-8601 (RFC 3339, or a naive `YYYY-MM-DD[THH:MM:SS]`
//! taken as UTC) or integer epoch seconds. Rows must be sorted by timestamp.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::types::Candle;

pub const HEADER: [&str; 5] = ["timestamp", "open", "high", "low", "close"];

#[derive(Debug, Clone, PartialEq)]
pub struct CandleFile {
    /// Seconds since the epoch, one per candle.
    pub timestamps: Vec<i64>,
    pub candles: Vec<Candle>,
    pub warnings: Vec<String>,
}

/// Parse a timestamp to epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Read and validate candles. With `log_transform` every price is replaced by
/// its natural log, which requires strictly positive prices.
pub fn read_candles(reader: impl Read, log_transform: bool) -> Result<CandleFile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    if header != HEADER {
        return Err(parse_err(1, format!("expected header `{}`, got `{}`", HEADER.join(","), header.join(","))));
    }
    let mut out = CandleFile {
        timestamps: Vec::new(),
        candles: Vec::new(),
        warnings: Vec::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let ts = parse_timestamp(&record[0]).ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &record[0])))?;
        let mut prices = [0.0f64; 4];
        for (k, p) in prices.iter_mut().enumerate() {
            let field = &record[k + 1];
            *p = field
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad {} `{field}`", HEADER[k + 1])))?;
            if log_transform {
                if !(*p > 0.0) {
                    return Err(parse_err(line, format!("{} {} is not positive; cannot take logs", HEADER[k + 1], *p)));
                }
                *p = p.ln();
            }
        }
        let candle = Candle::new(prices[0], prices[1], prices[2], prices[3]);
        candle.validate().map_err(|e| parse_err(line, e.to_string()))?;
        if let Some(&prev) = out.timestamps.last() {
            if ts < prev {
                return Err(parse_err(line, format!("timestamp {ts} precedes {prev}; rows must be sorted")));
            }
        }
        out.timestamps.push(ts);
        out.candles.push(candle);
    }
    if out.candles.is_empty() {
        out.warnings.push("no candles after the header".into());
    }
    Ok(out)
}

pub fn ingest_candles(path: impl AsRef<Path>, log_transform: bool) -> Result<CandleFile> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_candles(std::io::BufReader::new(file), log_transform)
}

/// Write candles with epoch-second timestamps `start, start + step, …`.
/// Prices use the shortest representation that round-trips exactly.
pub fn write_candles(writer: impl Write, candles: &[Candle], start: i64, step: i64) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    for (i, c) in candles.iter().enumerate() {
        w.write_record([
            (start + step * i as i64).to_string(),
            c.open.to_string(),
            c.high.to_string(),
            c.low.to_string(),
            c.close.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
