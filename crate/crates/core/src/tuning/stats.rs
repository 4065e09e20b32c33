//! Student-t distribution and t-tests.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

const CF_EPS: f64 = 1e-10;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 500;

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    // modified Lentz evaluation
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("incomplete beta needs a, b > 0 (got {a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta at x = {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = math::lgamma(a + b) - math::lgamma(a) - math::lgamma(b)
        + a * math::ln(x)
        + b * math::ln(1.0 - x);
    let front = math::exp(ln_front);
    // the continued fraction converges fast on this side of the mean
    Ok(if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    })
}

fn check_df(df: f64) -> Result<()> {
    if !(df >= 1.0 && df.is_finite()) {
        return Err(Error::Domain(format!("degrees of freedom {df} must be >= 1")));
    }
    Ok(())
}

/// `P(T > t)` for `t ≥ 0`, without cancellation.
fn upper_tail(t: f64, df: f64) -> Result<f64> {
    let x = df / (df + t * t);
    Ok(0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5)?)
}

pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::Domain("t is NaN".into()));
    }
    Ok(if t >= 0.0 { 1.0 - upper_tail(t, df)? } else { upper_tail(-t, df)? })
}

/// Survival function `P(T > t)`.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::Domain("t is NaN".into()));
    }
    Ok(if t >= 0.0 { upper_tail(t, df)? } else { 1.0 - upper_tail(-t, df)? })
}

fn student_t_pdf(t: f64, df: f64) -> f64 {
    math::exp(
        math::lgamma(0.5 * (df + 1.0))
            - math::lgamma(0.5 * df)
            - 0.5 * math::ln(df * core::f64::consts::PI)
            - 0.5 * (df + 1.0) * math::ln1p(t * t / df),
    )
}

/// Inverse CDF of Student's t at probability `p`.
pub fn t_critical(p: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-t_critical(1.0 - p, df)?);
    }
    let tail = 1.0 - p;
    let (mut lo, mut hi) = (0.0, 1.0);
    while upper_tail(hi, df)? > tail {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical(format!("t quantile at p = {p} is out of range")));
        }
    }
    // Newton on the survival function, kept inside the bracket
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = upper_tail(t, df)? - tail;
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = f / student_t_pdf(t, df);
        let mut next = t + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-13 * t.abs().max(1.0) {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// Alternative hypothesis of a t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub side: Side,
}

/// Test from sample size, mean and sample standard deviation.
pub fn t_test_from_summary(n: usize, mean: f64, sd: f64, reference: f64, side: Side) -> Result<TTest> {
    if n < 2 {
        return Err(Error::shape(format!("t-test needs at least 2 samples, got {n}")));
    }
    if !(sd > 0.0) {
        return Err(Error::UndefinedTest("zero standard deviation"));
    }
    let df = (n - 1) as f64;
    let t = (mean - reference) / (sd / math::sqrt(n as f64));
    let p = match side {
        Side::Greater => student_t_sf(t, df)?,
        Side::Less => student_t_cdf(t, df)?,
        Side::TwoSided => (2.0 * student_t_sf(t.abs(), df)?).min(1.0),
    };
    Ok(TTest { t, p, df, side })
}

pub fn one_sample_t_test(samples: &[f64], reference: f64, side: Side) -> Result<TTest> {
    if samples.len() < 2 {
        return Err(Error::shape(format!(
            "t-test needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let sd = math::sample_std(samples);
    // rounding-level dispersion around a constant is still zero variance
    if sd <= 1e-14 * math::mean(samples).abs() {
        return Err(Error::UndefinedTest("zero standard deviation"));
    }
    t_test_from_summary(samples.len(), math::mean(samples), sd, reference, side)
}

/// One-sample test of `a − b` against zero.
pub fn paired_t_test(a: &[f64], b: &[f64], side: Side) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!(
            "paired samples of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    one_sample_t_test(&d, 0.0, side)
}

/// `min(1, p·m)` for each p-value.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < p_values.len() {
        return Err(Error::Domain(format!(
            "{} p-values but only {m} comparisons",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}
