//! Synthetic market data: one-factor returns, lognormal spreads and
//! return-derived features.
//!
//! Asset `i` on day `t` returns `drift_i + beta_i·m_t + vol_i·ε_{t,i}` with
//! `m_t ~ N(0, market_vol²)` and standard normal `ε`. Feature row `t` only
//! uses information available at the close of day `t`.

use chrono::{Datelike, NaiveDate, Weekday};
use folio_core::{Error, FeaturePanel, ReturnsPanel, SpreadPanel, TRADING_DAYS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Daily parameters of one asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    pub drift: f64,
    /// Idiosyncratic daily volatility; must be positive.
    pub vol: f64,
    /// Loading on the market factor.
    pub beta: f64,
}

impl Default for AssetSpec {
    fn default() -> Self {
        Self { drift: 0.0002, vol: 0.012, beta: 1.0 }
    }
}

impl AssetSpec {
    /// An asset whose expected annualized Sharpe ratio is `sharpe` given
    /// the market volatility of the regime.
    pub fn with_sharpe(sharpe: f64, vol: f64, beta: f64, market_vol: f64) -> Self {
        let total = (vol * vol + beta * beta * market_vol * market_vol).sqrt();
        Self { drift: sharpe * total / TRADING_DAYS.sqrt(), vol, beta }
    }
}

/// Replaces the default parameters of the asset at `index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetOverride {
    pub index: usize,
    #[serde(flatten)]
    pub spec: AssetSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// Per asset: return and rolling volatility; plus the market return.
    #[default]
    Compact,
    /// Compact plus per-asset spread and a volume-change proxy.
    Full,
}

impl FeatureSet {
    pub fn n_features(self, n_assets: usize) -> usize {
        match self {
            Self::Compact => 2 * n_assets + 1,
            Self::Full => 4 * n_assets + 1,
        }
    }
}

/// Parameters of the generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Regime {
    pub market_vol: f64,
    pub default_asset: AssetSpec,
    pub assets: Vec<AssetOverride>,
    /// Median spread as a fraction of price.
    pub spread_median: f64,
    /// Log-scale dispersion of spreads.
    pub spread_dispersion: f64,
    pub feature_set: FeatureSet,
    /// Window of the rolling-volatility feature.
    pub vol_window: usize,
    pub start_date: NaiveDate,
}

impl Default for Regime {
    fn default() -> Self {
        Self {
            market_vol: 0.008,
            default_asset: AssetSpec::default(),
            assets: Vec::new(),
            spread_median: 0.001,
            spread_dispersion: 0.3,
            feature_set: FeatureSet::Compact,
            vol_window: 20,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
        }
    }
}

impl Regime {
    /// Per-asset parameters after applying overrides.
    pub fn asset_specs(&self, n_assets: usize) -> Result<Vec<AssetSpec>> {
        let bad = |m: String| Err(Error::Config(format!("regime: {m}")).into());
        if !(self.market_vol >= 0.0 && self.market_vol.is_finite()) {
            return bad(format!("market_vol {} must be finite and >= 0", self.market_vol));
        }
        if !(self.spread_median > 0.0 && self.spread_median < 1.0) {
            return bad(format!("spread_median {} must lie in (0, 1)", self.spread_median));
        }
        if !(self.spread_dispersion >= 0.0 && self.spread_dispersion.is_finite()) {
            return bad("spread_dispersion must be finite and >= 0".into());
        }
        if self.vol_window < 2 {
            return bad("vol_window must be >= 2".into());
        }
        let mut specs = vec![self.default_asset; n_assets];
        for o in &self.assets {
            match specs.get_mut(o.index) {
                Some(s) => *s = o.spec,
                None => return bad(format!("override index {} >= n_assets {n_assets}", o.index)),
            }
        }
        for (i, s) in specs.iter().enumerate() {
            if !(s.vol > 0.0 && s.vol.is_finite()) {
                return bad(format!("asset {i} has vol {}; must be > 0", s.vol));
            }
            if !(s.drift.is_finite() && s.beta.is_finite()) {
                return bad(format!("asset {i} has non-finite drift or beta"));
            }
        }
        Ok(specs)
    }
}

/// Consecutive weekdays starting at `start` (moved forward to a weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

fn rolling_pop_std(x: &[f64], end: usize, window: usize) -> f64 {
    let lo = (end + 1).saturating_sub(window);
    let w = &x[lo..=end];
    if w.len() < 2 {
        return 0.0;
    }
    let m = w.iter().sum::<f64>() / w.len() as f64;
    (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / w.len() as f64).sqrt()
}

/// Generates aligned returns, spreads and features. Identical arguments
/// give bitwise-identical panels.
pub fn synth_generate(
    n_assets: usize,
    n_days: usize,
    regime: &Regime,
    seed: u64,
) -> Result<(ReturnsPanel, SpreadPanel, FeaturePanel)> {
    if n_assets < 2 {
        return Err(Error::Config(format!("need >= 2 assets, got {n_assets}")).into());
    }
    if n_days < 2 {
        return Err(Error::Config(format!("need >= 2 days, got {n_days}")).into());
    }
    let specs = regime.asset_specs(n_assets)?;
    let n = n_assets;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    let mut returns = vec![0.0; n_days * n];
    let mut spreads = vec![0.0; n_days * n];
    let mut log_volume = vec![0.0; n_days * n];
    for t in 0..n_days {
        let m = regime.market_vol * normal();
        for (i, s) in specs.iter().enumerate() {
            let r = s.drift + s.beta * m + s.vol * normal();
            if r <= -1.0 {
                return Err(Error::Config(format!("regime produced a return of {r} for asset {i}")).into());
            }
            returns[t * n + i] = r;
        }
        for i in 0..n {
            spreads[t * n + i] = (regime.spread_median * (regime.spread_dispersion * normal()).exp()).min(0.5);
        }
        for (i, s) in specs.iter().enumerate() {
            let total = (s.vol * s.vol + s.beta * s.beta * regime.market_vol * regime.market_vol).sqrt();
            log_volume[t * n + i] = 0.5 * returns[t * n + i].abs() / total + 0.2 * normal();
        }
    }

    let columns: Vec<Vec<f64>> = (0..n).map(|i| returns.iter().skip(i).step_by(n).copied().collect()).collect();
    let tickers: Vec<String> = (0..n).map(|i| format!("S{i:02}")).collect();
    let mut names: Vec<String> = Vec::new();
    names.extend(tickers.iter().map(|t| format!("ret_{t}")));
    names.extend(tickers.iter().map(|t| format!("vol_{t}")));
    if regime.feature_set == FeatureSet::Full {
        names.extend(tickers.iter().map(|t| format!("spread_{t}")));
        names.extend(tickers.iter().map(|t| format!("volchg_{t}")));
    }
    names.push("ret_market".into());

    let f = regime.feature_set.n_features(n);
    let mut features = Vec::with_capacity(n_days * f);
    for t in 0..n_days {
        let row = &returns[t * n..(t + 1) * n];
        features.extend_from_slice(row);
        features.extend(columns.iter().map(|c| rolling_pop_std(c, t, regime.vol_window)));
        if regime.feature_set == FeatureSet::Full {
            features.extend_from_slice(&spreads[t * n..(t + 1) * n]);
            features.extend((0..n).map(|i| {
                if t == 0 {
                    0.0
                } else {
                    log_volume[t * n + i] - log_volume[(t - 1) * n + i]
                }
            }));
        }
        features.push(row.iter().sum::<f64>() / n as f64);
    }

    let dates = business_days(regime.start_date, n_days);
    Ok((
        ReturnsPanel::new(dates.clone(), tickers.clone(), returns)?,
        SpreadPanel::new(dates.clone(), tickers, spreads)?,
        FeaturePanel::new(dates, names, features)?,
    ))
}
