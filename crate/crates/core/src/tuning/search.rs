//! Seeded random search scored by the maximin Information-Ratio bound.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::t_critical;
use crate::allocators::AllocatorSpec;
use crate::losses::LossKind;
use crate::metrics::Metric;
use crate::walkforward::BacktestResult;
use crate::{math, Error, Result};

/// Values the CVaR and risk-parity weights are drawn from.
pub const LAMBDA_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

/// `mean − t_{0.95, K−1} · sd / √K` with the sample standard deviation.
pub fn maximin_objective(irs: &[f64]) -> Result<f64> {
    let k = irs.len();
    if k < 2 {
        return Err(Error::shape(format!("maximin objective needs K >= 2 IRs, got {k}")));
    }
    if irs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite information ratio".into()));
    }
    // centring on the first value keeps identical inputs exact
    let c = irs[0];
    let mean = c + irs.iter().map(|x| x - c).sum::<f64>() / k as f64;
    let ss: f64 = irs.iter().map(|x| (x - mean) * (x - mean)).sum();
    if ss == 0.0 {
        return Ok(mean);
    }
    let sd = math::sqrt(ss / (k - 1) as f64);
    Ok(mean - t_critical(0.95, (k - 1) as f64)? * sd / math::sqrt(k as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuous {
    pub lo: f64,
    pub hi: f64,
    /// Sample uniformly in log space.
    #[serde(default)]
    pub log: bool,
}

impl Continuous {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        if self.log {
            math::exp(rng.random_range(math::ln(self.lo)..math::ln(self.hi)))
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }

    fn valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi && (!self.log || self.lo > 0.0)
    }

    fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

/// Domains of the tuned hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub learning_rate: Continuous,
    pub weight_decay: Continuous,
    pub hidden_size: Vec<usize>,
    pub epochs: IntRange,
    pub loss_kind: Vec<LossKind>,
    pub lambda_cvar: Vec<f64>,
    pub lambda_rp: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: Continuous { lo: 1e-4, hi: 1e-1, log: true },
            weight_decay: Continuous { lo: 1e-6, hi: 1e-2, log: true },
            hidden_size: vec![8, 16, 32],
            epochs: IntRange { lo: 5, hi: 30 },
            loss_kind: vec![LossKind::A, LossKind::B],
            lambda_cvar: LAMBDA_GRID.to_vec(),
            lambda_rp: LAMBDA_GRID.to_vec(),
        }
    }
}

/// One draw from a [`SearchSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden_size: usize,
    pub epochs: usize,
    pub loss_kind: LossKind,
    pub lambda_cvar: f64,
    pub lambda_rp: f64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("search space: {m}")));
        if !self.learning_rate.valid() || !self.weight_decay.valid() {
            return bad("invalid continuous range");
        }
        if self.hidden_size.is_empty() || self.hidden_size.contains(&0) {
            return bad("hidden_size needs positive choices");
        }
        if self.epochs.lo > self.epochs.hi {
            return bad("epochs range is empty");
        }
        if self.loss_kind.is_empty() {
            return bad("loss_kind has no choices");
        }
        for grid in [&self.lambda_cvar, &self.lambda_rp] {
            if grid.is_empty() || grid.iter().any(|x| !LAMBDA_GRID.contains(x)) {
                return bad("lambda choices must come from {0.001, 0.01, 0.1, 1.0}");
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Hyperparameters {
        let pick = |rng: &mut ChaCha8Rng, n: usize| rng.random_range(0..n);
        Hyperparameters {
            learning_rate: self.learning_rate.sample(rng),
            weight_decay: self.weight_decay.sample(rng),
            hidden_size: self.hidden_size[pick(rng, self.hidden_size.len())],
            epochs: rng.random_range(self.epochs.lo..=self.epochs.hi),
            loss_kind: self.loss_kind[pick(rng, self.loss_kind.len())],
            lambda_cvar: self.lambda_cvar[pick(rng, self.lambda_cvar.len())],
            lambda_rp: self.lambda_rp[pick(rng, self.lambda_rp.len())],
        }
    }

    pub fn contains(&self, h: &Hyperparameters) -> bool {
        self.learning_rate.contains(h.learning_rate)
            && self.weight_decay.contains(h.weight_decay)
            && self.hidden_size.contains(&h.hidden_size)
            && (self.epochs.lo..=self.epochs.hi).contains(&h.epochs)
            && self.loss_kind.contains(&h.loss_kind)
            && self.lambda_cvar.contains(&h.lambda_cvar)
            && self.lambda_rp.contains(&h.lambda_rp)
    }
}

impl Hyperparameters {
    /// `base` with these hyperparameters and `seed` filled in.
    pub fn apply(&self, base: &AllocatorSpec, seed: u64) -> AllocatorSpec {
        let mut s = base.clone();
        s.training.learning_rate = self.learning_rate;
        s.training.weight_decay = self.weight_decay;
        s.training.hidden_size = self.hidden_size;
        s.training.epochs = self.epochs;
        s.training.loss_kind = self.loss_kind;
        s.training.seed = Some(seed);
        s.loss.lambda_cvar = self.lambda_cvar;
        s.loss.lambda_rp = self.lambda_rp;
        s
    }
}

/// Seed of trial `index`: the first draw of stream `index` of the base
/// generator.
pub fn child_seed(base_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Outcome of one trial. Failed trials keep their error message and have
/// no objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub params: Hyperparameters,
    pub step_irs: Vec<f64>,
    pub objective: Option<f64>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub backtest: Option<BacktestResult>,
}

impl TrialResult {
    /// Objective, or `−∞` for a failed trial.
    pub fn score(&self) -> f64 {
        self.objective.unwrap_or(f64::NEG_INFINITY)
    }
}

fn score_backtest(b: &BacktestResult) -> Result<(Vec<f64>, f64)> {
    let irs = b
        .step_information_ratios()
        .into_iter()
        .map(|m| match m {
            Metric::Value(v) => Ok(v),
            _ => Err(Error::UndefinedMetric("information ratio of a step")),
        })
        .collect::<Result<Vec<f64>>>()?;
    let obj = maximin_objective(&irs)?;
    Ok((irs, obj))
}

/// Evaluates `budget` sampled configurations and ranks them by objective
/// (descending, ties by trial index).
pub fn random_search<F>(
    space: &SearchSpace,
    base: &AllocatorSpec,
    budget: usize,
    base_seed: u64,
    mut eval: F,
) -> Result<Vec<TrialResult>>
where
    F: FnMut(&AllocatorSpec) -> Result<BacktestResult>,
{
    space.validate()?;
    if budget == 0 {
        return Err(Error::Config("search budget must be >= 1".into()));
    }
    let mut trials = Vec::with_capacity(budget);
    for index in 0..budget {
        let seed = child_seed(base_seed, index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = space.sample(&mut rng);
        let spec = params.apply(base, seed);
        let outcome = eval(&spec).and_then(|b| score_backtest(&b).map(|s| (s, b)));
        let trial = match outcome {
            Ok(((irs, obj), b)) => TrialResult {
                index,
                seed,
                params,
                step_irs: irs,
                objective: Some(obj),
                failure: None,
                backtest: Some(b),
            },
            Err(e) => {
                log::warn!("trial {index} failed: {e}");
                TrialResult {
                    index,
                    seed,
                    params,
                    step_irs: Vec::new(),
                    objective: None,
                    failure: Some(e.to_string()),
                    backtest: None,
                }
            }
        };
        trials.push(trial);
    }
    if trials.iter().all(|t| t.objective.is_none()) {
        return Err(Error::SearchFailed(budget));
    }
    trials.sort_by(|a, b| b.score().total_cmp(&a.score()).then(a.index.cmp(&b.index)));
    Ok(trials)
}
