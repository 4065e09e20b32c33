//! Expanding-window walk-forward backtests with half-spread transaction
//! costs charged on the first day of each holding period.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::allocators::{allocate_from_history, equal_weight, train_on_samples, AllocatorSpec, TrainingSample};
use crate::metrics::{full_report, information_ratio, Metric, MetricsReport};
use crate::portfolio::{check_alignment, weighted_rows};
use crate::{Error, FeaturePanel, NetReturnSeries, Result, ReturnsPanel, SpreadPanel, WeightVector};

/// Protocol constants and split boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkForwardPlan {
    /// Input window length in days.
    pub t_in: usize,
    /// Holding period in days.
    pub t_out: usize,
    /// Number of walk-forward steps.
    pub k: usize,
    /// Spacing of training-sample start days.
    pub stride: usize,
    /// First training day; defaults to the first panel date.
    pub train_start: Option<NaiveDate>,
    /// First evaluation day; defaults to `k·t_out` days before the end.
    pub eval_start: Option<NaiveDate>,
    /// Last evaluation day (inclusive); defaults to the last panel date.
    pub eval_end: Option<NaiveDate>,
}

impl Default for WalkForwardPlan {
    fn default() -> Self {
        Self {
            t_in: 180,
            t_out: 60,
            k: 8,
            stride: 1,
            train_start: None,
            eval_start: None,
            eval_end: None,
        }
    }
}

/// A plan resolved against concrete panel rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedPlan {
    pub train_start: usize,
    pub eval_start: usize,
    /// Exclusive end of the evaluated days (`eval_start + k·t_out`).
    pub eval_end: usize,
    /// Days in the declared evaluation range beyond `k·t_out`.
    pub ignored_trailing: usize,
}

impl WalkForwardPlan {
    pub fn validate(&self) -> Result<()> {
        if self.t_in == 0 || self.t_out == 0 || self.k == 0 || self.stride == 0 {
            return Err(Error::Config("t_in, t_out, k and stride must all be >= 1".into()));
        }
        Ok(())
    }

    pub fn eval_len(&self) -> usize {
        self.k * self.t_out
    }

    /// Maps the date boundaries onto `dates`.
    pub fn resolve(&self, dates: &[NaiveDate]) -> Result<ResolvedPlan> {
        self.validate()?;
        let find = |d: NaiveDate, what: &str| {
            dates
                .binary_search(&d)
                .map_err(|_| Error::Config(format!("{what} {d} is not a panel date")))
        };
        let last = match self.eval_end {
            Some(d) => find(d, "eval_end")? + 1,
            None => dates.len(),
        };
        let eval_start = match self.eval_start {
            Some(d) => find(d, "eval_start")?,
            None => last.checked_sub(self.eval_len()).ok_or_else(|| {
                Error::Config(format!(
                    "{} days cannot hold {} evaluation days",
                    dates.len(),
                    self.eval_len()
                ))
            })?,
        };
        let train_start = match self.train_start {
            Some(d) => find(d, "train_start")?,
            None => 0,
        };
        if last < eval_start + self.eval_len() {
            return Err(Error::Config(format!(
                "evaluation range of {} days is shorter than k*t_out = {}",
                last.saturating_sub(eval_start),
                self.eval_len()
            )));
        }
        if eval_start < train_start + self.t_in + self.t_out {
            return Err(Error::Config(format!(
                "training range of {} days is shorter than t_in + t_out = {}",
                eval_start.saturating_sub(train_start),
                self.t_in + self.t_out
            )));
        }
        Ok(ResolvedPlan {
            train_start,
            eval_start,
            eval_end: eval_start + self.eval_len(),
            ignored_trailing: last - eval_start - self.eval_len(),
        })
    }
}

fn samples_in<'a>(
    features: &'a FeaturePanel,
    returns: &'a ReturnsPanel,
    rows: Range<usize>,
    plan: &WalkForwardPlan,
) -> Result<Vec<TrainingSample<'a>>> {
    let span = plan.t_in + plan.t_out;
    if rows.len() < span {
        return Err(Error::shape(format!(
            "{} days available, a sample needs t_in + t_out = {span}",
            rows.len()
        )));
    }
    Ok((rows.start..=rows.end - span)
        .step_by(plan.stride)
        .map(|s| TrainingSample {
            start: s,
            input: features.rows(s..s + plan.t_in),
            target: returns.rows(s + plan.t_in..s + span),
        })
        .collect())
}

/// Stride-spaced `(t_in × F input, t_out × N target)` pairs from the plan's
/// training start through `upto` (inclusive); each target immediately
/// follows its input.
pub fn generate_training_samples<'a>(
    features: &'a FeaturePanel,
    returns: &'a ReturnsPanel,
    plan: &WalkForwardPlan,
    upto: NaiveDate,
) -> Result<Vec<TrainingSample<'a>>> {
    plan.validate()?;
    features.check_aligned(returns)?;
    let start = match plan.train_start {
        Some(d) => returns
            .index_of(d)
            .ok_or_else(|| Error::Config(format!("train_start {d} is not a panel date")))?,
        None => 0,
    };
    let end = returns.dates().partition_point(|d| *d <= upto);
    samples_in(features, returns, start..end.max(start), plan)
}

/// `|w_new − w_prev|` per asset; `None` stands for the all-zero portfolio.
pub fn turnover(w_new: &WeightVector, w_prev: Option<&WeightVector>) -> Result<Vec<f64>> {
    match w_prev {
        None => Ok(w_new.weights().iter().map(|w| w.abs()).collect()),
        Some(prev) => {
            if prev.len() != w_new.len() {
                return Err(Error::Alignment(format!(
                    "{} new weights against {} previous",
                    w_new.len(),
                    prev.len()
                )));
            }
            if !prev.tickers().is_empty() {
                check_alignment(w_new, prev.tickers())?;
            }
            Ok(w_new.weights().iter().zip(prev.weights()).map(|(a, b)| (a - b).abs()).collect())
        }
    }
}

/// `½ Σ Δᵢ·spreadᵢ`, as a fraction of portfolio value.
pub fn transaction_cost(delta: &[f64], spreads: &[f64]) -> Result<f64> {
    if delta.len() != spreads.len() {
        return Err(Error::Alignment(format!(
            "{} turnover entries against {} spreads",
            delta.len(),
            spreads.len()
        )));
    }
    if let Some(s) = spreads.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Data(format!("invalid spread {s}")));
    }
    Ok(0.5 * delta.iter().zip(spreads).map(|(d, s)| d * s).sum::<f64>())
}

/// Charges `cost` on day one: `(1 + r₁)(1 − cost) − 1`.
pub fn apply_cost_first_day(gross: &[f64], cost: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&cost) {
        return Err(Error::Data(format!("transaction cost {cost} outside [0, 1)")));
    }
    let mut net = gross.to_vec();
    if cost == 0.0 {
        return Ok(net);
    }
    if let Some(first) = net.first_mut() {
        *first = (1.0 + *first) * (1.0 - cost) - 1.0;
    }
    Ok(net)
}

/// One holding period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// One-based step number.
    pub step: usize,
    pub dates: Vec<NaiveDate>,
    /// Last day whose data was visible when the weights were chosen.
    pub last_visible_date: NaiveDate,
    pub weights: WeightVector,
    pub gross: Vec<f64>,
    pub cost: f64,
    pub net: Vec<f64>,
    /// Gross equal-weight returns over the same days.
    pub benchmark: Vec<f64>,
    pub information_ratio: Metric,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub steps: Vec<StepResult>,
    pub net: NetReturnSeries,
    pub benchmark: Vec<f64>,
    pub metrics: MetricsReport,
}

impl BacktestResult {
    pub fn step_information_ratios(&self) -> Vec<Metric> {
        self.steps.iter().map(|s| s.information_ratio).collect()
    }
}

/// Runs `spec` through `plan.k` expanding-window steps.
pub fn run_walkforward(
    spec: &AllocatorSpec,
    features: &FeaturePanel,
    returns: &ReturnsPanel,
    spreads: &SpreadPanel,
    plan: &WalkForwardPlan,
) -> Result<BacktestResult> {
    spec.validate()?;
    spreads.check_aligned(returns)?;
    features.check_aligned(returns)?;
    let r = plan.resolve(returns.dates())?;
    if r.ignored_trailing > 0 {
        log::warn!(
            "evaluation range has {} days beyond k*t_out; ignoring them",
            r.ignored_trailing
        );
    }
    let n = returns.n_cols();
    let ew = equal_weight(n)?;
    let mut prev: Option<WeightVector> = None;
    let mut steps = Vec::with_capacity(plan.k);
    for j in 0..plan.k {
        let start = r.eval_start + j * plan.t_out;
        let step = run_step(spec, features, returns, spreads, plan, &r, start, prev.as_ref(), &ew)
            .map_err(|e| Error::Step { step: j + 1, source: Box::new(e) })?;
        let mut step = step;
        step.step = j + 1;
        prev = Some(step.weights.clone());
        steps.push(step);
    }
    let dates: Vec<NaiveDate> = steps.iter().flat_map(|s| s.dates.iter().copied()).collect();
    let values: Vec<f64> = steps.iter().flat_map(|s| s.net.iter().copied()).collect();
    let benchmark: Vec<f64> = steps.iter().flat_map(|s| s.benchmark.iter().copied()).collect();
    let net = NetReturnSeries::new(dates, values)?;
    let metrics = full_report(net.values(), Some(&benchmark))?;
    Ok(BacktestResult { steps, net, benchmark, metrics })
}

#[allow(clippy::too_many_arguments)]
fn run_step(
    spec: &AllocatorSpec,
    features: &FeaturePanel,
    returns: &ReturnsPanel,
    spreads: &SpreadPanel,
    plan: &WalkForwardPlan,
    r: &ResolvedPlan,
    start: usize,
    prev: Option<&WeightVector>,
    ew: &WeightVector,
) -> Result<StepResult> {
    let n = returns.n_cols();
    let history = r.train_start..start;
    let weights = if spec.kind.is_trainable() {
        let samples = samples_in(features, returns, history.clone(), plan)?;
        let last_target = samples.last().map(|s| s.start + plan.t_in + plan.t_out - 1);
        if last_target.is_some_and(|t| t >= start) {
            return Err(Error::Data("training sample overlaps the evaluation window".into()));
        }
        let model = train_on_samples(spec, &samples, n, features.n_cols(), plan.t_in)?;
        model.predict_weights(features.rows(start - plan.t_in..start))?
    } else {
        allocate_from_history(spec, returns.rows(history.clone()), n)?
    };
    let weights = weights.with_tickers(returns.tickers().to_vec())?;

    let window = start..start + plan.t_out;
    let rows = returns.rows(window.clone());
    let gross = weighted_rows(weights.weights(), rows);
    let benchmark = weighted_rows(ew.weights(), rows);
    let cost = transaction_cost(&turnover(&weights, prev)?, spreads.row(start))?;
    let net = apply_cost_first_day(&gross, cost)?;
    let information_ratio = match information_ratio(&net, &benchmark) {
        Ok(v) => Metric::Value(v),
        Err(Error::UndefinedMetric(_)) => Metric::Undefined,
        Err(e) => return Err(e),
    };
    Ok(StepResult {
        step: 0,
        dates: returns.dates()[window].to_vec(),
        last_visible_date: returns.dates()[start - 1],
        weights,
        gross,
        cost,
        metrics: full_report(&net, Some(&benchmark))?,
        net,
        benchmark,
        information_ratio,
    })
}
