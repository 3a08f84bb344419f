//! Reading `timestamp,price` CSV files.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDateTime};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub timestamp: DateTime<FixedOffset>,
    pub price: f64,
}

/// Validated price records, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickSeries {
    pub ticks: Vec<Tick>,
    pub source: String,
    /// Rows dropped because a later row had the same timestamp.
    pub duplicates_collapsed: usize,
}

impl TickSeries {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }
}

/// Accepts RFC 3339 with an offset, or a naive `YYYY-MM-DD[T ]HH:MM[:SS[.f]]` read as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<FixedOffset>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t);
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc().fixed_offset())
}

pub fn ingest_csv(path: &Path) -> CliResult<TickSeries> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    ingest_reader(file, &path.display().to_string())
}

pub fn ingest_reader<R: Read>(reader: R, source: &str) -> CliResult<TickSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::data(format!("{source}: {e}")))?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "price" {
        return Err(CliError::data(format!("{source}: expected header 'timestamp,price', found '{}'", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut series = TickSeries { source: source.to_owned(), ..Default::default() };
    for (row, record) in rdr.records().enumerate() {
        // header is line 1
        let line = record.as_ref().ok().and_then(|r| r.position()).map_or(row + 2, |p| p.line() as usize);
        let record = record.map_err(|e| CliError::data(format!("{source}:{line}: {e}")))?;
        let timestamp = parse_timestamp(&record[0])
            .ok_or_else(|| CliError::data(format!("{source}:{line}: cannot parse timestamp '{}'", &record[0])))?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| CliError::data(format!("{source}:{line}: cannot parse price '{}'", &record[1])))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(CliError::data(format!("{source}:{line}: price must be positive, got {price}")));
        }
        match series.ticks.last_mut() {
            Some(last) if timestamp == last.timestamp => {
                last.price = price;
                series.duplicates_collapsed += 1;
            }
            Some(last) if timestamp < last.timestamp => {
                return Err(CliError::data(format!(
                    "{source}:{line}: timestamp {timestamp} precedes {}; input must be sorted",
                    last.timestamp
                )));
            }
            _ => series.ticks.push(Tick { timestamp, price }),
        }
    }
    if series.duplicates_collapsed > 0 {
        log::warn!("{source}: collapsed {} duplicate timestamps (kept the last row)", series.duplicates_collapsed);
    }
    Ok(series)
}

/// Writes ticks back out in the accepted format.
pub fn write_ticks<W: std::io::Write>(writer: W, ticks: &[Tick]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CliError::data(e.to_string());
    w.write_record(["timestamp", "price"]).map_err(io)?;
    for t in ticks {
        let ts = t.timestamp.to_rfc3339();
        w.write_record([ts, format!("{}", t.price)]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> CliResult<TickSeries> {
        ingest_reader(s.as_bytes(), "t.csv")
    }

    #[test]
    fn three_rows() {
        let s = read("timestamp,price\n2024-01-02T09:30:00Z,100\n2024-01-02T09:31:00Z,100.5\n2024-01-02T09:32:00Z,99.9\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.ticks[1].price, 100.5);
    }

    #[test]
    fn negative_price_names_line() {
        let err = read("timestamp,price\n2024-01-02T09:30:00Z,100\n2024-01-02T09:31:00Z,-1\n").unwrap_err();
        assert!(matches!(err, CliError::Data(_)));
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn duplicates_keep_last() {
        let s = read("timestamp,price\n2024-01-02T09:30:00Z,100\n2024-01-02T09:30:00Z,101\n2024-01-02T09:31:00Z,102\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.ticks[0].price, 101.0);
        assert_eq!(s.duplicates_collapsed, 1);
    }

    #[test]
    fn unsorted_rejected() {
        let err = read("timestamp,price\n2024-01-02T09:31:00Z,100\n2024-01-02T09:30:00Z,101\n").unwrap_err();
        assert!(err.to_string().contains("sorted"));
    }

    #[test]
    fn header_and_parse_errors() {
        assert!(read("time,px\n2024-01-02T09:30:00Z,1\n").is_err());
        let err = read("timestamp,price\nyesterday,1\n").unwrap_err();
        assert!(err.to_string().contains(":2:"));
        assert!(read("timestamp,price\n2024-01-02T09:30:00Z,abc\n").is_err());
    }

    #[test]
    fn timestamp_forms() {
        let a = parse_timestamp("2024-01-02T09:30:00-05:00").unwrap();
        let b = parse_timestamp("2024-01-02 14:30:00").unwrap();
        assert_eq!(a, b);
        assert!(parse_timestamp("2024-01-02T14:30").is_some());
    }

    #[test]
    fn write_then_read() {
        let s = read("timestamp,price\n2024-01-02T09:30:00+00:00,100.25\n2024-01-02T09:31:00+00:00,100.5\n").unwrap();
        let mut buf = Vec::new();
        write_ticks(&mut buf, &s.ticks).unwrap();
        let back = ingest_reader(buf.as_slice(), "t.csv").unwrap();
        assert_eq!(back.ticks, s.ticks);
    }
}
