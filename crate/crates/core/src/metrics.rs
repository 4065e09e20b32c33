//! Full-period evaluation metrics on daily net return series.
//!
//! Standard deviations are population (divide by `T`) everywhere. Sharpe,
//! Sortino and Calmar are annualized with 252 trading days; the Information
//! Ratio is left at daily frequency.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::math;
use crate::{Error, Result, TRADING_DAYS};

/// Tail level used for CVaR in reports.
pub const REPORT_CVAR_ALPHA: f64 = 0.05;

/// A metric value or an explicit marker for why it has none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Value(f64),
    /// The defining denominator is zero (or the sample is too short).
    Undefined,
    /// Positive numerator over a zero denominator, e.g. Omega with no losses.
    PosInfinity,
}

impl Metric {
    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Metric::Value(_))
    }

    fn from_result(r: Result<f64>) -> Result<Self> {
        match r {
            Ok(v) => Ok(Metric::Value(v)),
            Err(Error::UndefinedMetric(_)) => Ok(Metric::Undefined),
            Err(e) => Err(e),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Value(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Metric::Undefined => f.write_str("undefined"),
            Metric::PosInfinity => f.write_str("+inf"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Metric::Value(v) => s.serialize_f64(*v),
            Metric::Undefined => s.serialize_str("undefined"),
            Metric::PosInfinity => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Metric::Value(v)),
            Repr::Tag(t) if t == "undefined" => Ok(Metric::Undefined),
            Repr::Tag(t) if t == "+inf" => Ok(Metric::PosInfinity),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("unknown metric tag {t:?}"))),
        }
    }
}

/// The seven evaluation metrics, plus the Information Ratio when a
/// benchmark was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub compounded_return: f64,
    pub sharpe: Metric,
    pub sortino: Metric,
    pub omega: Metric,
    pub calmar: Metric,
    pub mdd: f64,
    pub cvar: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information_ratio: Option<Metric>,
    pub n_days: usize,
}

fn non_empty(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::shape("metric of an empty series"));
    }
    Ok(())
}

/// `∏(1 + r_t) − 1`.
pub fn compounded_return(s: &[f64]) -> Result<f64> {
    non_empty(s)?;
    Ok(s.iter().fold(1.0, |w, r| w * (1.0 + r)) - 1.0)
}

/// `mean / std · √252`.
pub fn sharpe_annualized(s: &[f64]) -> Result<f64> {
    if s.len() < 2 {
        return Err(Error::shape("Sharpe needs at least two returns"));
    }
    let sd = math::pop_std(s);
    if sd == 0.0 {
        return Err(Error::UndefinedMetric("sharpe: zero volatility"));
    }
    Ok(math::mean(s) / sd * math::sqrt(TRADING_DAYS))
}

/// `mean / sqrt(mean(min(r, 0)²)) · √252`, target return zero.
pub fn sortino_annualized(s: &[f64]) -> Result<f64> {
    non_empty(s)?;
    let dd = math::sqrt(s.iter().map(|r| r.min(0.0) * r.min(0.0)).sum::<f64>() / s.len() as f64);
    if dd == 0.0 {
        return Err(Error::UndefinedMetric("sortino: no downside"));
    }
    Ok(math::mean(s) / dd * math::sqrt(TRADING_DAYS))
}

/// Most negative `W_t / max_{u≤t} W_u − 1`, with initial wealth 1 counted
/// as a peak.
pub fn max_drawdown(s: &[f64]) -> Result<f64> {
    non_empty(s)?;
    let (mut wealth, mut peak, mut mdd) = (1.0f64, 1.0f64, 0.0f64);
    for r in s {
        wealth *= 1.0 + r;
        peak = peak.max(wealth);
        mdd = mdd.min(wealth / peak - 1.0);
    }
    Ok(mdd)
}

/// `((1 + R_total)^(252/T) − 1) / |MDD|`.
pub fn calmar(s: &[f64]) -> Result<f64> {
    let mdd = max_drawdown(s)?;
    if mdd == 0.0 {
        return Err(Error::UndefinedMetric("calmar: zero drawdown"));
    }
    let total = compounded_return(s)?;
    let annual = math::powf(1.0 + total, TRADING_DAYS / s.len() as f64) - 1.0;
    Ok(annual / mdd.abs())
}

/// `Σ max(0, r − θ) / Σ max(0, θ − r)`. No losses gives
/// [`Metric::PosInfinity`] (or [`Metric::Undefined`] if there are no gains
/// either).
pub fn omega_ratio(s: &[f64], theta: f64) -> Result<Metric> {
    non_empty(s)?;
    let up: f64 = s.iter().map(|r| (r - theta).max(0.0)).sum();
    let down: f64 = s.iter().map(|r| (theta - r).max(0.0)).sum();
    Ok(if down > 0.0 {
        Metric::Value(up / down)
    } else if up > 0.0 {
        Metric::PosInfinity
    } else {
        Metric::Undefined
    })
}

/// Mean of the `⌊αT⌋` smallest returns.
pub fn cvar_empirical(s: &[f64], alpha: f64) -> Result<f64> {
    let k = math::tail_count(alpha, s.len());
    if k == 0 {
        return Err(Error::shape(format!(
            "CVaR at alpha={alpha} has an empty tail for T={}",
            s.len()
        )));
    }
    let mut sorted: Vec<f64> = s.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// `mean(r − b) / std(r − b)` at daily frequency.
pub fn information_ratio(r: &[f64], b: &[f64]) -> Result<f64> {
    if r.len() != b.len() {
        return Err(Error::Alignment(format!(
            "series of length {} against benchmark of length {}",
            r.len(),
            b.len()
        )));
    }
    if r.len() < 2 {
        return Err(Error::shape("Information Ratio needs at least two returns"));
    }
    let excess: Vec<f64> = r.iter().zip(b).map(|(x, y)| x - y).collect();
    let sd = math::pop_std(&excess);
    // a constant excess leaves rounding-level dispersion only
    if sd <= 1e-14 * math::mean(&excess).abs() || sd == 0.0 {
        return Err(Error::UndefinedMetric("information ratio: zero tracking error"));
    }
    Ok(math::mean(&excess) / sd)
}

/// All metrics of `s`; degenerate ones are carried as sentinels.
pub fn full_report(s: &[f64], benchmark: Option<&[f64]>) -> Result<MetricsReport> {
    non_empty(s)?;
    let cvar = match cvar_empirical(s, REPORT_CVAR_ALPHA) {
        Ok(v) => Metric::Value(v),
        Err(Error::Shape(_)) => Metric::Undefined,
        Err(e) => return Err(e),
    };
    let sharpe = if s.len() < 2 {
        Metric::Undefined
    } else {
        Metric::from_result(sharpe_annualized(s))?
    };
    let information_ratio = match benchmark {
        Some(b) if b.len() == s.len() && s.len() < 2 => Some(Metric::Undefined),
        Some(b) => Some(Metric::from_result(information_ratio(s, b))?),
        None => None,
    };
    Ok(MetricsReport {
        compounded_return: compounded_return(s)?,
        sharpe,
        sortino: Metric::from_result(sortino_annualized(s))?,
        omega: omega_ratio(s, 0.0)?,
        calmar: Metric::from_result(calmar(s))?,
        mdd: max_drawdown(s)?,
        cvar,
        information_ratio,
        n_days: s.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn display_honours_precision() {
        use alloc::format;
        assert_eq!(format!("{:.3}", Metric::Value(1.23456)), "1.235");
        assert_eq!(format!("{}", Metric::Value(0.5)), "0.5");
        assert_eq!(format!("{:.3}", Metric::PosInfinity), "+inf");
    }

    #[test]
    fn compounded_examples() {
        assert!(close(compounded_return(&[0.1, -0.1]).unwrap(), -0.01, 1e-15));
        assert_eq!(compounded_return(&[0.0]).unwrap(), 0.0);
        assert_eq!(compounded_return(&[0.0; 37]).unwrap(), 0.0);
    }

    #[test]
    fn sharpe_examples() {
        assert_eq!(sharpe_annualized(&[0.01, -0.01]).unwrap(), 0.0);
        assert!(matches!(sharpe_annualized(&[0.003; 5]), Err(Error::UndefinedMetric(_))));
        let v = sharpe_annualized(&[0.02, 0.0]).unwrap();
        assert!(close(v, 252f64.sqrt(), 1e-9));
        assert!(close(v, 15.8745, 1e-4));
    }

    #[test]
    fn sortino_examples() {
        assert!(matches!(sortino_annualized(&[0.01, 0.0]), Err(Error::UndefinedMetric(_))));
        assert_eq!(sortino_annualized(&[0.01, -0.01]).unwrap(), 0.0);
        assert!(sortino_annualized(&[0.02, -0.01, -0.01]).unwrap().abs() < 1e-12);
        let v = sortino_annualized(&[0.03, -0.01, -0.01]).unwrap();
        let oracle = (0.01 / 3.0) / (0.0002f64 / 3.0).sqrt() * 252f64.sqrt();
        assert!(close(v, oracle, 1e-12));
        assert!(close(v, 6.4807, 1e-4));
    }

    #[test]
    fn drawdown_and_calmar_examples() {
        assert_eq!(max_drawdown(&[0.01, 0.02, 0.0]).unwrap(), 0.0);
        assert!(close(max_drawdown(&[0.1, -0.5, 0.2]).unwrap(), -0.5, 1e-15));
        assert!(close(max_drawdown(&[-0.2]).unwrap(), -0.2, 1e-15));

        assert!(matches!(calmar(&[0.01, 0.02]), Err(Error::UndefinedMetric(_))));
        // wealth 1 → 0.5 → 1: zero total return, 50% drawdown
        assert!(calmar(&[-0.5, 1.0]).unwrap().abs() < 1e-15);
        let s = [0.1, -0.5, 0.2];
        let exact = (0.66f64.powf(84.0) - 1.0) / 0.5;
        assert!(close(calmar(&s).unwrap(), exact, 1e-6));
        assert!(close(exact, -2.0, 1e-6));
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_ratio(&[0.02, -0.01], 0.0).unwrap(), Metric::Value(2.0));
        assert_eq!(omega_ratio(&[0.03, -0.03, 0.01, -0.01], 0.0).unwrap(), Metric::Value(1.0));
        assert_eq!(omega_ratio(&[0.01, 0.02], 0.0).unwrap(), Metric::PosInfinity);
        assert_eq!(omega_ratio(&[0.0, 0.0], 0.0).unwrap(), Metric::Undefined);
    }

    #[test]
    fn cvar_examples() {
        let mut s = vec![0.01; 100];
        for x in s.iter_mut().step_by(20) {
            *x = -0.04;
        }
        assert!(close(cvar_empirical(&s, 0.05).unwrap(), -0.04, 1e-15));
        assert_eq!(cvar_empirical(&[0.007; 40], 0.05).unwrap(), 0.007);
        assert!(matches!(cvar_empirical(&[0.0; 19], 0.05), Err(Error::Shape(_))));
    }

    #[test]
    fn information_ratio_examples() {
        let b = [0.01, 0.0, -0.02, 0.005];
        assert!(matches!(information_ratio(&b, &b), Err(Error::UndefinedMetric(_))));
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.01).collect();
        assert!(matches!(
            information_ratio(&shifted, &b),
            Err(Error::UndefinedMetric(_))
        ));
        let r = [0.01, -0.01, 0.02, 0.02];
        let v = information_ratio(&r, &[0.0; 4]).unwrap();
        assert!(close(v, 0.01 / 0.00015f64.sqrt(), 1e-12));
        assert!(close(v, 0.8165, 1e-4));
    }

    #[test]
    fn zero_series_report() {
        let r = full_report(&[0.0; 480], None).unwrap();
        assert_eq!(r.compounded_return, 0.0);
        assert_eq!(r.sharpe, Metric::Undefined);
        assert_eq!(r.mdd, 0.0);
        assert_eq!(r.n_days, 480);
        assert_eq!(r.information_ratio, None);
    }

    /// Independent brute-force metrics: prefix products, explicit sorting
    /// and two-pass moments written without the helpers above.
    fn oracle(s: &[f64]) -> [f64; 7] {
        let n = s.len() as f64;
        let mut wealth = Vec::new();
        let mut w = 1.0;
        for r in s {
            w *= 1.0 + r;
            wealth.push(w);
        }
        let total = wealth[wealth.len() - 1] - 1.0;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let sharpe = mean / var.sqrt() * 252f64.sqrt();
        let down = (s.iter().filter(|r| **r < 0.0).map(|r| r * r).sum::<f64>() / n).sqrt();
        let sortino = mean / down * 252f64.sqrt();
        let mut mdd = 0.0f64;
        for t in 0..wealth.len() {
            let peak = wealth[..=t].iter().copied().fold(1.0, f64::max);
            mdd = mdd.min(wealth[t] / peak - 1.0);
        }
        let calmar = ((1.0 + total).powf(252.0 / n) - 1.0) / mdd.abs();
        let gains: f64 = s.iter().filter(|r| **r > 0.0).sum();
        let losses: f64 = -s.iter().filter(|r| **r < 0.0).sum::<f64>();
        let mut sorted = s.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = (s.len() * 5) / 100;
        let cvar = sorted[..k].iter().sum::<f64>() / k as f64;
        [total, sharpe, sortino, gains / losses, calmar, mdd, cvar]
    }

    fn fixture() -> Vec<f64> {
        // deterministic pseudo-random returns from a simple LCG
        let mut state = 0x2545_f491_4f6c_dd1du64;
        (0..480)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64;
                0.0004 + 0.02 * (u - 0.5)
            })
            .collect()
    }

    #[test]
    fn report_matches_brute_force_oracle() {
        let s = fixture();
        let r = full_report(&s, None).unwrap();
        let o = oracle(&s);
        let got = [
            r.compounded_return,
            r.sharpe.value().unwrap(),
            r.sortino.value().unwrap(),
            r.omega.value().unwrap(),
            r.calmar.value().unwrap(),
            r.mdd,
            r.cvar.value().unwrap(),
        ];
        for (g, e) in got.iter().zip(o) {
            assert!((g - e).abs() <= 1e-9 * e.abs().max(1.0), "{g} vs {e}");
        }
        assert!(r.sharpe.value().unwrap() > 0.0 && r.omega.value().unwrap() > 1.0);
    }

    #[test]
    fn sentinels_serialize_as_tags() {
        let r = full_report(&[0.01, 0.02], Some(&[0.0, 0.0])).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"omega\":\"+inf\""));
        assert!(json.contains("\"calmar\":\"undefined\""));
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-0.2f64..0.2, 2..120)
    }

    proptest! {
        #[test]
        fn scale_invariance(s in series(), k in 0.1f64..4.0) {
            let scaled: Vec<f64> = s.iter().map(|x| x * k).collect();
            let zero = vec![0.0; s.len()];
            if let (Ok(a), Ok(b)) = (sharpe_annualized(&s), sharpe_annualized(&scaled)) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
            if let (Ok(a), Ok(b)) = (sortino_annualized(&s), sortino_annualized(&scaled)) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
            if let (Ok(a), Ok(b)) = (information_ratio(&s, &zero), information_ratio(&scaled, &zero)) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
            if let (Metric::Value(a), Metric::Value(b)) =
                (omega_ratio(&s, 0.0).unwrap(), omega_ratio(&scaled, 0.0).unwrap())
            {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn drawdown_of_prefix_is_not_worse(s in series(), cut in 1usize..120) {
            let cut = cut.min(s.len());
            prop_assert!(max_drawdown(&s[..cut]).unwrap() >= max_drawdown(&s).unwrap());
            let mdd = max_drawdown(&s).unwrap();
            prop_assert!((-1.0..=0.0).contains(&mdd));
        }

        #[test]
        fn cvar_below_median(s in proptest::collection::vec(-0.2f64..0.2, 20..120)) {
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            let m = sorted.len();
            let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
            prop_assert!(cvar_empirical(&s, 0.05).unwrap() <= median);
        }

        #[test]
        fn omega_above_one_iff_gains_exceed_losses(s in series()) {
            let gains: f64 = s.iter().map(|r| r.max(0.0)).sum();
            let losses: f64 = s.iter().map(|r| (-r).max(0.0)).sum();
            match omega_ratio(&s, 0.0).unwrap() {
                Metric::Value(v) => prop_assert_eq!(v > 1.0, gains > losses),
                Metric::PosInfinity => prop_assert!(gains > 0.0),
                Metric::Undefined => prop_assert!(gains == 0.0 && losses == 0.0),
            }
        }
    }
}
