//! Date-indexed panels: asset returns, bid-ask spreads and model features.
//!
//! Panels validate their axes on construction and are immutable afterwards,
//! so downstream code never re-checks alignment. Values are stored row-major
//! (one row per date).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Grid {
    dates: Vec<NaiveDate>,
    labels: Vec<String>,
    values: Vec<f64>,
}

impl Grid {
    fn new(
        what: &str,
        dates: Vec<NaiveDate>,
        labels: Vec<String>,
        values: Vec<f64>,
        min_cols: usize,
    ) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::shape(format!("{what}: at least one date required")));
        }
        if labels.len() < min_cols {
            return Err(Error::shape(format!(
                "{what}: at least {min_cols} columns required, got {}",
                labels.len()
            )));
        }
        if values.len() != dates.len() * labels.len() {
            return Err(Error::shape(format!(
                "{what}: {} values for {} dates x {} columns",
                values.len(),
                dates.len(),
                labels.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Alignment(format!(
                "{what}: dates not strictly increasing at {}",
                w[1]
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::Alignment(format!("{what}: duplicate column {a}")));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let n = labels.len();
            return Err(Error::Data(format!(
                "{what}: non-finite value at ({}, {})",
                dates[pos / n],
                labels[pos % n]
            )));
        }
        Ok(Self {
            dates,
            labels,
            values,
        })
    }

    fn row(&self, t: usize) -> &[f64] {
        let n = self.labels.len();
        &self.values[t * n..(t + 1) * n]
    }

    fn rows(&self, range: Range<usize>) -> &[f64] {
        let n = self.labels.len();
        &self.values[range.start * n..range.end * n]
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let n = self.labels.len();
        self.values.iter().skip(j).step_by(n).copied().collect()
    }

    fn slice(&self, range: Range<usize>) -> Self {
        Self {
            dates: self.dates[range.clone()].to_vec(),
            labels: self.labels.clone(),
            values: self.rows(range).to_vec(),
        }
    }

    fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

macro_rules! grid_accessors {
    ($ty:ident, $labels:ident) => {
        impl $ty {
            pub fn dates(&self) -> &[NaiveDate] {
                &self.0.dates
            }

            pub fn $labels(&self) -> &[String] {
                &self.0.labels
            }

            /// Row-major values, `n_rows() * n_cols()` long.
            pub fn values(&self) -> &[f64] {
                &self.0.values
            }

            pub fn n_rows(&self) -> usize {
                self.0.dates.len()
            }

            pub fn n_cols(&self) -> usize {
                self.0.labels.len()
            }

            pub fn row(&self, t: usize) -> &[f64] {
                self.0.row(t)
            }

            /// Contiguous row-major block for a range of rows.
            pub fn rows(&self, range: Range<usize>) -> &[f64] {
                self.0.rows(range)
            }

            pub fn column(&self, j: usize) -> Vec<f64> {
                self.0.column(j)
            }

            /// Copy of a contiguous range of rows.
            pub fn slice(&self, range: Range<usize>) -> Self {
                Self(self.0.slice(range))
            }

            /// Row index of `date`, if present.
            pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
                self.0.index_of(date)
            }
        }
    };
}

/// T×N matrix of simple daily asset returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel(Grid);

impl ReturnsPanel {
    /// Requires N ≥ 2, T ≥ 1, strictly increasing dates and finite values.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, values: Vec<f64>) -> Result<Self> {
        Grid::new("returns", dates, tickers, values, 2).map(Self)
    }
}

grid_accessors!(ReturnsPanel, tickers);

/// T×N matrix of bid-ask spreads as fractions of price.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadPanel(Grid);

impl SpreadPanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new("spreads", dates, tickers, values, 1)?;
        if let Some(pos) = grid.values.iter().position(|v| *v < 0.0) {
            let n = grid.labels.len();
            return Err(Error::Data(format!(
                "spreads: negative spread at ({}, {})",
                grid.dates[pos / n],
                grid.labels[pos % n]
            )));
        }
        Ok(Self(grid))
    }

    /// Checks that dates and tickers match `returns` exactly.
    pub fn check_aligned(&self, returns: &ReturnsPanel) -> Result<()> {
        check_axes("spreads", &self.0, &returns.0, true)
    }
}

grid_accessors!(SpreadPanel, tickers);

/// T×F matrix of model-input features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel(Grid);

impl FeaturePanel {
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        Grid::new("features", dates, names, values, 1).map(Self)
    }

    /// Checks that the date axis matches `returns` exactly.
    pub fn check_aligned(&self, returns: &ReturnsPanel) -> Result<()> {
        check_axes("features", &self.0, &returns.0, false)
    }
}

grid_accessors!(FeaturePanel, feature_names);

fn check_axes(what: &str, a: &Grid, b: &Grid, labels: bool) -> Result<()> {
    if labels && a.labels != b.labels {
        return Err(Error::Alignment(format!(
            "{what}: columns differ from returns panel"
        )));
    }
    if a.dates != b.dates {
        return Err(Error::Alignment(match first_unshared(&a.dates, &b.dates) {
            Some(d) => format!("{what}: date {d} is not present in both panels"),
            None => format!("{what}: date axis differs from returns"),
        }));
    }
    Ok(())
}

/// Earliest date present in exactly one of two sorted axes.
fn first_unshared(a: &[NaiveDate], b: &[NaiveDate]) -> Option<NaiveDate> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            core::cmp::Ordering::Less => return Some(a[i]),
            core::cmp::Ordering::Greater => return Some(b[j]),
        }
    }
    a.get(i).or_else(|| b.get(j)).copied()
}

/// Daily portfolio returns net of transaction costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl NetReturnSeries {
    /// Rejects non-finite values and daily losses of 100% or more.
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::shape(format!(
                "net series: {} dates for {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v <= -1.0) {
            return Err(Error::Data(format!(
                "net series: invalid return {} on {}",
                values[i], dates[i]
            )));
        }
        Ok(Self { dates, values })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    pub(crate) fn day(i: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    pub(crate) fn dates(n: usize) -> Vec<NaiveDate> {
        (0..n as u32).map(day).collect()
    }

    pub(crate) fn tickers(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("A{i}")).collect()
    }

    #[test]
    fn rejects_bad_axes() {
        let err = ReturnsPanel::new(vec![day(1), day(1)], tickers(2), vec![0.0; 4]).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
        let err = ReturnsPanel::new(dates(1), tickers(1), vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        let err = ReturnsPanel::new(dates(1), tickers(2), vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        let err = ReturnsPanel::new(dates(1), vec!["X".to_string(), "X".to_string()], vec![0.0; 2])
            .unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn spreads_must_be_non_negative_and_aligned() {
        assert!(SpreadPanel::new(dates(1), tickers(2), vec![0.01, -0.01]).is_err());
        let r = ReturnsPanel::new(dates(2), tickers(2), vec![0.0; 4]).unwrap();
        let s = SpreadPanel::new(dates(2), tickers(2), vec![0.01; 4]).unwrap();
        s.check_aligned(&r).unwrap();
        let shifted = SpreadPanel::new(vec![day(0), day(5)], tickers(2), vec![0.01; 4]).unwrap();
        let err = shifted.check_aligned(&r).unwrap_err();
        assert!(err.to_string().contains("2020-01-02"), "{err}");
    }

    #[test]
    fn gap_date_is_named() {
        let r = ReturnsPanel::new(dates(4), tickers(2), vec![0.0; 8]).unwrap();
        let gap = FeaturePanel::new(vec![day(0), day(1), day(3)], tickers(1), vec![0.0; 3]).unwrap();
        let err = gap.check_aligned(&r).unwrap_err();
        assert!(err.to_string().contains("2020-01-03"), "{err}");
    }

    #[test]
    fn rows_and_columns() {
        let r = ReturnsPanel::new(dates(3), tickers(2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        assert_eq!(r.row(1), &[3.0, 4.0]);
        assert_eq!(r.rows(1..3), &[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(r.column(1), vec![2.0, 4.0, 6.0]);
        assert_eq!(r.index_of(day(2)), Some(2));
        assert_eq!(r.slice(1..2).values(), &[3.0, 4.0]);
    }

    #[test]
    fn net_series_rejects_total_loss() {
        assert!(NetReturnSeries::new(dates(2), vec![0.0, -1.0]).is_err());
        assert!(NetReturnSeries::new(dates(2), vec![0.0, -0.99]).is_ok());
    }
}
