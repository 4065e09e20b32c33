//! Finite-difference gradient oracle.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Central differences `(f(x + h·e_i) − f(x − h·e_i)) / 2h`.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut p = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p)?;
        p[i] = x[i] - h;
        let down = f(&p)?;
        p[i] = x[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite evaluation at coordinate {i}"
            )));
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Component-wise agreement between an analytic and a numeric gradient.
///
/// Components whose magnitude (max of both) is below `1e-3` are judged on
/// absolute error, the rest on relative error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientComparison {
    pub max_relative_error: f64,
    pub max_absolute_error_small: f64,
}

const SMALL_MAGNITUDE: f64 = 1e-3;

impl GradientComparison {
    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        self.max_relative_error < rel_tol && self.max_absolute_error_small < abs_tol
    }
}

pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> GradientComparison {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let mut out = GradientComparison {
        max_relative_error: 0.0,
        max_absolute_error_small: 0.0,
    };
    for (a, n) in analytic.iter().zip(numeric) {
        let err = (a - n).abs();
        let scale = a.abs().max(n.abs());
        if scale < SMALL_MAGNITUDE {
            out.max_absolute_error_small = out.max_absolute_error_small.max(err);
        } else {
            out.max_relative_error = out.max_relative_error.max(err / scale);
        }
        if err.is_nan() {
            out.max_relative_error = f64::INFINITY;
        }
    }
    out
}
