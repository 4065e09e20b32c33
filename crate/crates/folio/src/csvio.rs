//! Wide-format CSV panels: a `date` column followed by one column per
//! ticker or feature.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! a write/read cycle reproduces every `f64` bit for bit.

use std::path::Path;

use chrono::NaiveDate;
use folio_core::{FeaturePanel, NetReturnSeries, ReturnsPanel, SpreadPanel};

use crate::error::{FolioError, Result};
use crate::report::write_atomic;

/// A parsed wide CSV before it is turned into a typed panel.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub dates: Vec<NaiveDate>,
    pub labels: Vec<String>,
    /// Row-major values.
    pub values: Vec<f64>,
}

fn parse_error(path: &Path, line: u64, column: &str, message: String) -> FolioError {
    FolioError::Parse {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    }
}

/// Reads a wide CSV. Empty cells are collected and reported together as
/// `(date, column)` pairs; any other non-numeric cell is a parse error
/// carrying its line and column.
pub fn read_wide_csv(path: &Path) -> Result<WideTable> {
    let csv_err = |source| FolioError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("date") {
        return Err(parse_error(path, 1, header.get(0).unwrap_or(""), "first column must be `date`".into()));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if labels.is_empty() {
        return Err(parse_error(path, 1, "", "no value columns".into()));
    }

    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let date_cell = record.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d")
            .map_err(|e| parse_error(path, line, "date", format!("{date_cell:?}: {e}")))?;
        for (label, cell) in labels.iter().zip(record.iter().skip(1)) {
            if cell.is_empty() {
                missing.push(format!("({date}, {label})"));
                values.push(f64::NAN);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(path, line, label, format!("{cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, label, format!("{cell:?} is not finite")));
            }
            values.push(v);
        }
        dates.push(date);
    }
    if !missing.is_empty() {
        return Err(FolioError::MissingCells {
            path: path.to_path_buf(),
            cells: missing.join(", "),
        });
    }
    Ok(WideTable { dates, labels, values })
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes a wide CSV atomically.
pub fn write_wide_csv(path: &Path, dates: &[NaiveDate], labels: &[String], values: &[f64]) -> Result<()> {
    let mut out = String::from("date");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    let n = labels.len();
    for (t, d) in dates.iter().enumerate() {
        out.push_str(&d.to_string());
        for v in &values[t * n..(t + 1) * n] {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_returns(path: &Path, p: &ReturnsPanel) -> Result<()> {
    write_wide_csv(path, p.dates(), p.tickers(), p.values())
}

pub fn write_spreads(path: &Path, p: &SpreadPanel) -> Result<()> {
    write_wide_csv(path, p.dates(), p.tickers(), p.values())
}

pub fn write_features(path: &Path, p: &FeaturePanel) -> Result<()> {
    write_wide_csv(path, p.dates(), p.feature_names(), p.values())
}

/// Loads and cross-validates the three input panels.
pub fn load_panels(
    returns_csv: &Path,
    spreads_csv: &Path,
    features_csv: &Path,
) -> Result<(ReturnsPanel, SpreadPanel, FeaturePanel)> {
    let r = read_wide_csv(returns_csv)?;
    let returns = ReturnsPanel::new(r.dates, r.labels, r.values)?;
    let s = read_wide_csv(spreads_csv)?;
    let spreads = SpreadPanel::new(s.dates, s.labels, s.values)?;
    let f = read_wide_csv(features_csv)?;
    let features = FeaturePanel::new(f.dates, f.labels, f.values)?;
    spreads.check_aligned(&returns)?;
    features.check_aligned(&returns)?;
    Ok((returns, spreads, features))
}

/// Writes a net series as `date,net_return`.
pub fn write_series(path: &Path, series: &NetReturnSeries) -> Result<()> {
    let mut out = String::from("date,net_return\n");
    for (d, v) in series.dates().iter().zip(series.values()) {
        out.push_str(&format!("{d},{}\n", fmt_f64(*v)));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_series(path: &Path) -> Result<NetReturnSeries> {
    let t = read_wide_csv(path)?;
    if t.labels != ["net_return"] {
        return Err(parse_error(path, 1, "", "expected columns date,net_return".into()));
    }
    Ok(NetReturnSeries::new(t.dates, t.values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + chrono::Days::new(i)
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_day_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let dates: Vec<_> = (0..3).map(day).collect();
        let tickers = vec!["AAA".to_string(), "BBB".to_string()];
        let r = ReturnsPanel::new(dates.clone(), tickers.clone(), vec![0.1, -0.2, 1.0 / 3.0, 1e-17, 0.0, -0.05])
            .unwrap();
        let s = SpreadPanel::new(dates.clone(), tickers, vec![0.001, 0.002, 0.003, 0.004, 0.005, 0.006]).unwrap();
        let f = FeaturePanel::new(dates, vec!["x".into()], vec![1.5, f64::MIN_POSITIVE, -7.0]).unwrap();
        let (pr, ps, pf) = (dir.path().join("r.csv"), dir.path().join("s.csv"), dir.path().join("f.csv"));
        write_returns(&pr, &r).unwrap();
        write_spreads(&ps, &s).unwrap();
        write_features(&pf, &f).unwrap();
        let (r2, s2, f2) = load_panels(&pr, &ps, &pf).unwrap();
        assert_eq!((r2, s2, f2), (r, s, f));
    }

    #[test]
    fn gap_date_is_an_alignment_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(dir.path(), "r.csv", "date,A,B\n2021-03-01,0,0\n2021-03-02,0,0\n2021-03-03,0,0\n");
        let s = write(dir.path(), "s.csv", "date,A,B\n2021-03-01,0,0\n2021-03-02,0,0\n2021-03-03,0,0\n");
        let f = write(dir.path(), "f.csv", "date,x\n2021-03-01,0\n2021-03-03,0\n");
        let err = load_panels(&r, &s, &f).unwrap_err();
        assert!(matches!(err, FolioError::Core(folio_core::Error::Alignment(_))), "{err}");
        assert!(err.to_string().contains("2021-03-02"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "date,A,B\n2021-03-01,0,0\n2021-03-02,0,abc\n");
        match read_wide_csv(&p).unwrap_err() {
            FolioError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "B");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_cells_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "date,A,B\n2021-03-01,,0\n2021-03-02,0,\n");
        let err = read_wide_csv(&p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2021-03-01, A)") && msg.contains("(2021-03-02, B)"), "{msg}");
    }

    #[test]
    fn bad_date_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "date,A\n03/01/2021,0\n");
        assert!(matches!(read_wide_csv(&p).unwrap_err(), FolioError::Parse { line: 2, .. }));
        let p = write(dir.path(), "q.csv", "day,A\n2021-03-01,0\n");
        assert!(matches!(read_wide_csv(&p).unwrap_err(), FolioError::Parse { line: 1, .. }));
    }

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let values = vec![0.1 + 0.2, -1e-300, 123.456_789_012_345_67, -0.999];
        let s = NetReturnSeries::new((0..4).map(day).collect(), values).unwrap();
        let p = dir.path().join("series.csv");
        write_series(&p, &s).unwrap();
        assert_eq!(read_series(&p).unwrap(), s);
    }
}
