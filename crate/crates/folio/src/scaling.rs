//! Median/IQR feature scaling fitted on training dates only.

use std::ops::RangeInclusive;

use chrono::NaiveDate;
use folio_core::{Error, FeaturePanel};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Features whose IQR falls below this are only median-centred.
pub const IQR_FLOOR: f64 = 1e-12;

/// Per-feature statistics of a fitted robust scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScalerState {
    pub feature_names: Vec<String>,
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
    /// `true` where IQR < [`IQR_FLOOR`].
    pub flagged: Vec<bool>,
    pub fit_start: NaiveDate,
    pub fit_end: NaiveDate,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `p·(n − 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fits median and IQR on the rows dated within `range`.
pub fn robust_fit(features: &FeaturePanel, range: RangeInclusive<NaiveDate>) -> Result<RobustScalerState> {
    let dates = features.dates();
    let (first, last) = (dates[0], dates[dates.len() - 1]);
    if range.start() > range.end() || *range.start() < first || *range.end() > last {
        return Err(Error::Config(format!(
            "fit range {}..={} is not within the panel ({first}..={last})",
            range.start(),
            range.end()
        ))
        .into());
    }
    let lo = dates.partition_point(|d| d < range.start());
    let hi = dates.partition_point(|d| d <= range.end());
    if hi - lo < 4 {
        return Err(Error::Shape(format!("robust_fit needs >= 4 rows, got {}", hi - lo)).into());
    }
    let f = features.n_cols();
    let rows = features.rows(lo..hi);
    let mut median = Vec::with_capacity(f);
    let mut iqr = Vec::with_capacity(f);
    for j in 0..f {
        let mut col: Vec<f64> = rows.iter().skip(j).step_by(f).copied().collect();
        col.sort_by(f64::total_cmp);
        median.push(quantile_sorted(&col, 0.5));
        iqr.push(quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25));
    }
    let flagged: Vec<bool> = iqr.iter().map(|q| *q < IQR_FLOOR).collect();
    for (name, _) in features.feature_names().iter().zip(&flagged).filter(|(_, f)| **f) {
        log::warn!("feature {name} has near-zero IQR; centring only");
    }
    Ok(RobustScalerState {
        feature_names: features.feature_names().to_vec(),
        median,
        iqr,
        flagged,
        fit_start: dates[lo],
        fit_end: dates[hi - 1],
    })
}

impl RobustScalerState {
    fn lookup(&self, features: &FeaturePanel) -> Result<Vec<usize>> {
        features
            .feature_names()
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Alignment(format!("feature {n} is unknown to the scaler")).into())
            })
            .collect()
    }

    fn map(&self, features: &FeaturePanel, f: impl Fn(f64, f64, f64) -> f64) -> Result<FeaturePanel> {
        let idx = self.lookup(features)?;
        let n = idx.len();
        let values = features
            .values()
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let j = idx[k % n];
                let scale = if self.flagged[j] { 1.0 } else { self.iqr[j] };
                f(*x, self.median[j], scale)
            })
            .collect();
        Ok(FeaturePanel::new(
            features.dates().to_vec(),
            features.feature_names().to_vec(),
            values,
        )?)
    }
}

/// `(x − median)/IQR`, or `x − median` for flagged features.
pub fn robust_apply(state: &RobustScalerState, features: &FeaturePanel) -> Result<FeaturePanel> {
    state.map(features, |x, m, s| (x - m) / s)
}

/// Inverse of [`robust_apply`].
pub fn robust_invert(state: &RobustScalerState, scaled: &FeaturePanel) -> Result<FeaturePanel> {
    state.map(scaled, |z, m, s| z * s + m)
}
