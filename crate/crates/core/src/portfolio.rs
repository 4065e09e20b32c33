//! The long-only, fully invested weight simplex and portfolio returns.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::panel::ReturnsPanel;
use crate::{Error, Result};

/// Tolerance on `|Σw − 1|`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Non-negative weights summing to one.
///
/// `tickers` is either empty (unlabelled, matched by length only) or one
/// identifier per weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    tickers: Vec<String>,
}

impl WeightVector {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Attaches asset identifiers.
    pub fn with_tickers(mut self, tickers: Vec<String>) -> Result<Self> {
        if tickers.len() != self.weights.len() {
            return Err(Error::Alignment(format!(
                "{} tickers for {} weights",
                tickers.len(),
                self.weights.len()
            )));
        }
        self.tickers = tickers;
        Ok(self)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }
}

/// Checks the simplex constraints: every weight ≥ 0 and `|Σw − 1| ≤ 1e-9`.
pub fn validate_weights(raw: &[f64]) -> Result<WeightVector> {
    if raw.is_empty() {
        return Err(Error::ConstraintViolation("empty weight vector".into()));
    }
    if let Some((i, w)) = raw.iter().enumerate().find(|(_, w)| !w.is_finite()) {
        return Err(Error::ConstraintViolation(format!(
            "weight {i} is not finite ({w})"
        )));
    }
    if let Some((i, w)) = raw.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(Error::ConstraintViolation(format!(
            "weight {i} is negative ({w})"
        )));
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::ConstraintViolation(format!(
            "weights sum to {sum}, not 1"
        )));
    }
    Ok(WeightVector {
        weights: raw.to_vec(),
        tickers: Vec::new(),
    })
}

/// Daily portfolio returns `r_t = wᵀR_t` for every row of the panel.
pub fn portfolio_returns(w: &WeightVector, panel: &ReturnsPanel) -> Result<Vec<f64>> {
    check_alignment(w, panel.tickers())?;
    Ok(weighted_rows(w.weights(), panel.values()))
}

pub(crate) fn check_alignment(w: &WeightVector, tickers: &[String]) -> Result<()> {
    if w.len() != tickers.len() || (!w.tickers.is_empty() && w.tickers != tickers) {
        return Err(Error::Alignment(
            "weight tickers do not match the panel".into(),
        ));
    }
    Ok(())
}

/// Dot product of `w` with each `w.len()`-wide row of a row-major block.
pub(crate) fn weighted_rows(w: &[f64], rows: &[f64]) -> Vec<f64> {
    rows.chunks_exact(w.len())
        .map(|row| row.iter().zip(w).map(|(r, w)| r * w).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::tests::{dates, tickers};
    use alloc::vec;
    use proptest::prelude::*;

    fn panel(rows: &[[f64; 2]]) -> ReturnsPanel {
        ReturnsPanel::new(
            dates(rows.len()),
            tickers(2),
            rows.iter().flatten().copied().collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_asset_examples() {
        let w = validate_weights(&[0.5, 0.5]).unwrap();
        assert_eq!(portfolio_returns(&w, &panel(&[[0.02, -0.01]])).unwrap(), vec![0.005]);

        let w = validate_weights(&[0.3, 0.7]).unwrap();
        let r = portfolio_returns(&w, &panel(&[[0.01, 0.02], [-0.01, 0.0]])).unwrap();
        assert!((r[0] - 0.017).abs() < 1e-15);
        assert!((r[1] + 0.003).abs() < 1e-15);
    }

    #[test]
    fn unit_weight_selects_column() {
        let p = panel(&[[0.013, 0.5], [-0.07, 0.1], [0.0, 0.2]]);
        let w = validate_weights(&[1.0, 0.0]).unwrap();
        assert_eq!(portfolio_returns(&w, &p).unwrap(), p.column(0));
    }

    #[test]
    fn validation_errors() {
        assert!(validate_weights(&[0.25; 4]).is_ok());
        assert!(matches!(
            validate_weights(&[0.6, 0.5]),
            Err(Error::ConstraintViolation(_))
        ));
        assert!(matches!(
            validate_weights(&[-0.1, 1.1]),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn ticker_mismatch_is_alignment_error() {
        let p = panel(&[[0.0, 0.0]]);
        let w = validate_weights(&[0.5, 0.5])
            .unwrap()
            .with_tickers(vec!["X".into(), "Y".into()])
            .unwrap();
        assert!(matches!(portfolio_returns(&w, &p), Err(Error::Alignment(_))));
        let w3 = validate_weights(&[0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(portfolio_returns(&w3, &p), Err(Error::Alignment(_))));
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn convex_combination_bounds(
            w in simplex(3),
            rows in proptest::collection::vec(proptest::collection::vec(-0.1f64..0.1, 3), 1..20),
        ) {
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let p = ReturnsPanel::new(dates(rows.len()), tickers(3), flat).unwrap();
            let w = validate_weights(&w).unwrap();
            let r = portfolio_returns(&w, &p).unwrap();
            for (t, row) in rows.iter().enumerate() {
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(r[t] >= lo - 1e-15 && r[t] <= hi + 1e-15);
            }
        }

        #[test]
        fn linear_in_weights(
            w1 in simplex(3),
            w2 in simplex(3),
            a in 0.0f64..1.0,
            rows in proptest::collection::vec(proptest::collection::vec(-0.1f64..0.1, 3), 1..10),
        ) {
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| a * x + (1.0 - a) * y).collect();
            let f1 = weighted_rows(&w1, &flat);
            let f2 = weighted_rows(&w2, &flat);
            let fm = weighted_rows(&mix, &flat);
            for t in 0..fm.len() {
                prop_assert!((fm[t] - (a * f1[t] + (1.0 - a) * f2[t])).abs() < 1e-15);
            }
        }
    }
}
