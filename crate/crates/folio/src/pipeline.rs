//! The work behind each CLI command.
//!
//! Two phases share the protocol: the validation phase evaluates the
//! `k·t_out` days immediately before the test range and is used only by
//! `tune`; the test phase evaluates the configured range and is used by
//! `backtest` and `evaluate`. Each phase fits its feature scaler on its own
//! pre-evaluation rows and trains its models from scratch.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use folio_core::allocators::{train_on_samples, AllocatorKind, AllocatorSpec};
use folio_core::metrics::Metric;
use folio_core::tuning::{
    bonferroni, one_sample_t_test, paired_t_test, pareto_frontier, random_search, Side, TrialResult,
};
use folio_core::walkforward::{generate_training_samples, run_walkforward, BacktestResult, WalkForwardPlan};
use folio_core::{FeaturePanel, ReturnsPanel, SpreadPanel};
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_checkpoint;
use crate::config::{AllocatorEntry, DataSource, RunConfig};
use crate::csvio::{load_panels, write_features, write_returns, write_spreads};
use crate::error::{FolioError, Result};
use crate::report::{emit_backtest, read_json, write_atomic, write_json, Manifest, RunReport};
use crate::scaling::{robust_apply, robust_fit, RobustScalerState};
use crate::synth::synth_generate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Validation,
    Test,
}

/// Panels ready for a walk-forward run.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub returns: ReturnsPanel,
    pub spreads: SpreadPanel,
    /// Scaled when the config asks for it.
    pub features: FeaturePanel,
    pub raw_features: FeaturePanel,
    pub scaler: Option<RobustScalerState>,
    pub plan: WalkForwardPlan,
}

pub fn load_raw(cfg: &RunConfig) -> Result<(ReturnsPanel, SpreadPanel, FeaturePanel)> {
    match &cfg.data {
        DataSource::Csv { returns, spreads, features } => {
            for p in [returns, spreads, features] {
                if !p.is_file() {
                    return Err(FolioError::Config(format!("data file {} does not exist", p.display())));
                }
            }
            load_panels(returns, spreads, features)
        }
        DataSource::Synthetic { n_assets, n_days, seed, regime } => {
            let min = cfg.plan.t_in + 2 * cfg.plan.t_out;
            if *n_days < min {
                return Err(FolioError::Config(format!("n_days {n_days} is below t_in + 2*t_out = {min}")));
            }
            synth_generate(*n_assets, *n_days, regime, *seed)
        }
    }
}

/// The plan of `phase`. The validation range ends the day before the
/// test range starts.
pub fn phase_plan(plan: &WalkForwardPlan, dates: &[NaiveDate], phase: Phase) -> Result<WalkForwardPlan> {
    let test = plan.resolve(dates)?;
    match phase {
        Phase::Test => Ok(plan.clone()),
        Phase::Validation => {
            let mut p = plan.clone();
            p.eval_start = None;
            p.eval_end = Some(dates[test.eval_start - 1]);
            p.resolve(dates).map_err(|e| {
                FolioError::Config(format!("no room for a validation phase before the test range: {e}"))
            })?;
            Ok(p)
        }
    }
}

pub fn prepare(cfg: &RunConfig, phase: Phase) -> Result<Dataset> {
    let (returns, spreads, raw_features) = load_raw(cfg)?;
    let plan = phase_plan(&cfg.plan, returns.dates(), phase)?;
    let (features, scaler) = if cfg.scale_features {
        let r = plan.resolve(returns.dates())?;
        let dates = returns.dates();
        let state = robust_fit(&raw_features, dates[r.train_start]..=dates[r.eval_start - 1])?;
        (robust_apply(&state, &raw_features)?, Some(state))
    } else {
        (raw_features.clone(), None)
    };
    Ok(Dataset { returns, spreads, features, raw_features, scaler, plan })
}

fn run(ds: &Dataset, spec: &AllocatorSpec) -> Result<BacktestResult> {
    Ok(run_walkforward(spec, &ds.features, &ds.returns, &ds.spreads, &ds.plan)?)
}

fn with_seed(mut spec: AllocatorSpec, seed: u64) -> AllocatorSpec {
    spec.training.seed = Some(seed);
    spec
}

fn stem(label: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("{label}__seed{s}"),
        None => label.to_string(),
    }
}

/// Written by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_days: usize,
    pub n_assets: usize,
    pub n_features: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub scaler_fit_start: Option<NaiveDate>,
    pub scaler_fit_end: Option<NaiveDate>,
    pub flagged_features: Vec<String>,
}

/// Validates the data, fits the scaler on the test phase's training rows,
/// and writes the panels (raw and scaled) with the scaler state.
pub fn ingest(cfg: &RunConfig, out: &Path) -> Result<IngestSummary> {
    let ds = prepare(cfg, Phase::Test)?;
    write_returns(&out.join("data/returns.csv"), &ds.returns)?;
    write_spreads(&out.join("data/spreads.csv"), &ds.spreads)?;
    write_features(&out.join("data/features.csv"), &ds.raw_features)?;
    if let Some(s) = &ds.scaler {
        write_features(&out.join("data/features_scaled.csv"), &ds.features)?;
        write_json(&out.join("scaler.json"), s)?;
    }
    let dates = ds.returns.dates();
    let summary = IngestSummary {
        n_days: ds.returns.n_rows(),
        n_assets: ds.returns.n_cols(),
        n_features: ds.features.n_cols(),
        first_date: dates[0],
        last_date: dates[dates.len() - 1],
        scaler_fit_start: ds.scaler.as_ref().map(|s| s.fit_start),
        scaler_fit_end: ds.scaler.as_ref().map(|s| s.fit_end),
        flagged_features: ds
            .scaler
            .as_ref()
            .map(|s| {
                s.feature_names
                    .iter()
                    .zip(&s.flagged)
                    .filter(|(_, f)| **f)
                    .map(|(n, _)| n.clone())
                    .collect()
            })
            .unwrap_or_default(),
    };
    write_json(&out.join("ingest.json"), &summary)?;
    write_json(&out.join("manifest.json"), &Manifest::new("ingest", cfg, Vec::new()))?;
    Ok(summary)
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum MetricsDocument {
    Backtest { run: RunReport },
    Evaluate(EvaluationReport),
}

#[derive(Debug, Clone, Default)]
pub struct BacktestOptions {
    /// Allocator name; defaults to the first entry.
    pub allocator: Option<String>,
    /// Seed of a trainable allocator; defaults to its configured seed,
    /// then the first evaluation seed.
    pub seed: Option<u64>,
    /// Also train on every sample before the evaluation range and save it.
    pub checkpoint: Option<PathBuf>,
}

fn entry<'a>(cfg: &'a RunConfig, name: Option<&str>) -> Result<&'a AllocatorEntry> {
    match name {
        Some(n) => cfg
            .allocator(n)
            .ok_or_else(|| FolioError::Config(format!("no allocator named {n:?}"))),
        None => Ok(&cfg.allocators[0]),
    }
}

/// Runs one allocator on the test phase.
pub fn backtest(cfg: &RunConfig, out: &Path, opts: &BacktestOptions) -> Result<RunReport> {
    let e = entry(cfg, opts.allocator.as_deref())?;
    let ds = prepare(cfg, Phase::Test)?;
    let mut spec = e.to_spec(&cfg.loss);
    let seed = e.kind.is_trainable().then(|| {
        opts.seed.or(spec.training.seed).unwrap_or(cfg.eval_seeds[0])
    });
    if let Some(s) = seed {
        spec = with_seed(spec, s);
    } else if opts.checkpoint.is_some() {
        return Err(FolioError::Config(format!("{} has no model to checkpoint", e.label())));
    }
    let result = run(&ds, &spec)?;
    let report = emit_backtest(out, &stem(&e.label(), seed), &e.label(), e.kind, seed, &result)?;
    if let Some(path) = &opts.checkpoint {
        let r = ds.plan.resolve(ds.returns.dates())?;
        let upto = ds.returns.dates()[r.eval_start - 1];
        let samples = generate_training_samples(&ds.features, &ds.returns, &ds.plan, upto)?;
        let model = train_on_samples(&spec, &samples, ds.returns.n_cols(), ds.features.n_cols(), ds.plan.t_in)?;
        save_checkpoint(path, &model)?;
    }
    write_json(&out.join("metrics.json"), &MetricsDocument::Backtest { run: report.clone() })?;
    write_json(&out.join("manifest.json"), &Manifest::new("backtest", cfg, seed.into_iter().collect()))?;
    Ok(report)
}

/// One line of `trials.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(flatten)]
    pub trial: TrialResult,
    pub sharpe: Option<Metric>,
    pub cvar: Option<Metric>,
}

/// Contents of `tuning.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub target: String,
    pub budget: usize,
    pub base_seed: u64,
    pub objective: String,
    /// Trial indices, best first.
    pub ranking: Vec<usize>,
    pub best: TrialRecord,
    /// Trial indices on the (Sharpe, CVaR) frontier.
    pub pareto: Vec<usize>,
    pub n_failed: usize,
}

/// Random search over the target allocator on the validation phase.
pub fn tune(cfg: &RunConfig, out: &Path, base_seed: Option<u64>) -> Result<TuningReport> {
    let search = cfg
        .search
        .as_ref()
        .ok_or_else(|| FolioError::Config("tune needs a [search] table".into()))?;
    let base_seed = base_seed.unwrap_or(search.base_seed);
    let e = entry(cfg, Some(&search.target))?;
    let base = e.to_spec(&cfg.loss);
    let ds = prepare(cfg, Phase::Validation)?;
    let trials = random_search(&search.space, &base, search.budget, base_seed, |spec| run(&ds, spec).map_err(|e| match e {
        FolioError::Core(c) => c,
        other => folio_core::Error::Data(other.to_string()),
    }))?;

    let records: Vec<TrialRecord> = trials
        .iter()
        .map(|t| TrialRecord {
            trial: t.clone(),
            sharpe: t.backtest.as_ref().map(|b| b.metrics.sharpe),
            cvar: t.backtest.as_ref().map(|b| b.metrics.cvar),
        })
        .collect();
    let mut by_index = records.clone();
    by_index.sort_by_key(|r| r.trial.index);
    let mut lines = String::new();
    for r in &by_index {
        lines.push_str(&serde_json::to_string(r).map_err(|source| FolioError::Json {
            path: out.join("trials.jsonl"),
            source,
        })?);
        lines.push('\n');
    }
    write_atomic(&out.join("trials.jsonl"), lines.as_bytes())?;

    let candidates: Vec<(usize, (f64, f64))> = records
        .iter()
        .filter_map(|r| match (r.trial.objective, r.sharpe?.value(), r.cvar?.value()) {
            (Some(_), Some(s), Some(c)) => Some((r.trial.index, (s, c))),
            _ => None,
        })
        .collect();
    let points: Vec<(f64, f64)> = candidates.iter().map(|c| c.1).collect();
    let pareto = pareto_frontier(&points).into_iter().map(|i| candidates[i].0).collect();
    let report = TuningReport {
        target: search.target.clone(),
        budget: search.budget,
        base_seed,
        objective: "maximin".into(),
        ranking: records.iter().map(|r| r.trial.index).collect(),
        best: records[0].clone(),
        pareto,
        n_failed: records.iter().filter(|r| r.trial.objective.is_none()).count(),
    };
    write_json(&out.join("tuning.json"), &report)?;
    let seeds = trials.iter().map(|t| t.seed).collect();
    write_json(&out.join("manifest.json"), &Manifest::new("tune", cfg, seeds))?;
    Ok(report)
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub n: usize,
    pub mean: Metric,
    pub sd: Metric,
}

impl SeedStats {
    fn of(values: &[Metric]) -> Self {
        let defined: Option<Vec<f64>> = values.iter().map(|m| m.value()).collect();
        let n = values.len();
        let Some(v) = defined.filter(|v| !v.is_empty()) else {
            return Self { n, mean: Metric::Undefined, sd: Metric::Undefined };
        };
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            Metric::Undefined
        } else {
            Metric::Value((v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt())
        };
        Self { n, mean: Metric::Value(mean), sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocatorSummary {
    pub name: String,
    pub kind: AllocatorKind,
    pub runs: Vec<RunReport>,
    pub sharpe: SeedStats,
    pub cvar: SeedStats,
    /// Runs whose net Sharpe exceeds the benchmark's.
    pub beats_benchmark: usize,
}

/// A t-test on per-seed net Sharpe ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// `vs_benchmark` (one-sample, greater) or `paired` (two-sided).
    pub family: String,
    pub a: String,
    pub b: String,
    pub n: usize,
    pub side: Side,
    pub t: Metric,
    pub df: Metric,
    pub p: Metric,
    /// Bonferroni-adjusted over the tests of the same family.
    pub p_adjusted: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seeds: Vec<u64>,
    /// Equal-weight run on the same range, the reference of every test.
    pub benchmark: RunReport,
    pub allocators: Vec<AllocatorSummary>,
    pub tests: Vec<TestOutcome>,
    /// Allocator names on the (mean Sharpe, mean CVaR) frontier.
    pub pareto: Vec<String>,
}

fn sharpes(s: &AllocatorSummary) -> Option<Vec<f64>> {
    s.runs.iter().map(|r| r.metrics.sharpe.value()).collect()
}

fn outcome(family: &str, a: &str, b: &str, n: usize, side: Side, r: folio_core::Result<folio_core::tuning::TTest>) -> Result<TestOutcome> {
    let base = TestOutcome {
        family: family.into(),
        a: a.into(),
        b: b.into(),
        n,
        side,
        t: Metric::Undefined,
        df: Metric::Undefined,
        p: Metric::Undefined,
        p_adjusted: Metric::Undefined,
        note: None,
    };
    match r {
        Ok(t) => Ok(TestOutcome { t: Metric::Value(t.t), df: Metric::Value(t.df), p: Metric::Value(t.p), ..base }),
        Err(e @ (folio_core::Error::UndefinedTest(_) | folio_core::Error::Shape(_))) => {
            Ok(TestOutcome { note: Some(e.to_string()), ..base })
        }
        Err(e) => Err(e.into()),
    }
}

fn adjust(tests: &mut [TestOutcome]) -> Result<()> {
    let m = tests.len();
    let defined: Vec<usize> = (0..m).filter(|i| tests[*i].p.is_defined()).collect();
    let p: Vec<f64> = defined.iter().filter_map(|i| tests[*i].p.value()).collect();
    for (i, adj) in defined.iter().zip(bonferroni(&p, m)?) {
        tests[*i].p_adjusted = Metric::Value(adj);
    }
    Ok(())
}

/// Multi-seed test-phase evaluation of every configured allocator.
pub fn evaluate(cfg: &RunConfig, out: &Path, seeds_override: Option<Vec<u64>>) -> Result<EvaluationReport> {
    let seeds = seeds_override.unwrap_or_else(|| cfg.eval_seeds.clone());
    if seeds.is_empty() {
        return Err(FolioError::Config("seed list is empty".into()));
    }
    let ds = prepare(cfg, Phase::Test)?;
    let bench_spec = AllocatorSpec::new(AllocatorKind::EqualWeight);
    let benchmark = emit_backtest(out, "benchmark", "benchmark", AllocatorKind::EqualWeight, None, &run(&ds, &bench_spec)?)?;
    let bench_sharpe = benchmark.metrics.sharpe.value();

    let mut allocators = Vec::with_capacity(cfg.allocators.len());
    for e in &cfg.allocators {
        let label = e.label();
        let spec = e.to_spec(&cfg.loss);
        let run_seeds: Vec<Option<u64>> =
            if e.kind.is_trainable() { seeds.iter().copied().map(Some).collect() } else { vec![None] };
        let mut runs = Vec::with_capacity(run_seeds.len());
        for seed in run_seeds {
            let spec = match seed {
                Some(s) => with_seed(spec.clone(), s),
                None => spec.clone(),
            };
            log::info!("evaluating {}", stem(&label, seed));
            let result = run(&ds, &spec)?;
            runs.push(emit_backtest(out, &stem(&label, seed), &label, e.kind, seed, &result)?);
        }
        let sharpe = SeedStats::of(&runs.iter().map(|r| r.metrics.sharpe).collect::<Vec<_>>());
        let cvar = SeedStats::of(&runs.iter().map(|r| r.metrics.cvar).collect::<Vec<_>>());
        let beats_benchmark = runs
            .iter()
            .filter(|r| matches!((r.metrics.sharpe.value(), bench_sharpe), (Some(a), Some(b)) if a > b))
            .count();
        allocators.push(AllocatorSummary { name: label, kind: e.kind, runs, sharpe, cvar, beats_benchmark });
    }

    let trainable: Vec<&AllocatorSummary> = allocators.iter().filter(|a| a.kind.is_trainable()).collect();
    let mut vs_bench = Vec::new();
    for a in &trainable {
        let r = match (sharpes(a), bench_sharpe) {
            (Some(s), Some(b)) => one_sample_t_test(&s, b, Side::Greater),
            _ => Err(folio_core::Error::UndefinedTest("undefined Sharpe ratio")),
        };
        vs_bench.push(outcome("vs_benchmark", &a.name, "benchmark", a.runs.len(), Side::Greater, r)?);
    }
    let mut paired = Vec::new();
    for (i, a) in trainable.iter().enumerate() {
        for b in &trainable[i + 1..] {
            let r = match (sharpes(a), sharpes(b)) {
                (Some(x), Some(y)) => paired_t_test(&x, &y, Side::TwoSided),
                _ => Err(folio_core::Error::UndefinedTest("undefined Sharpe ratio")),
            };
            paired.push(outcome("paired", &a.name, &b.name, a.runs.len(), Side::TwoSided, r)?);
        }
    }
    adjust(&mut vs_bench)?;
    adjust(&mut paired)?;
    let tests = vs_bench.into_iter().chain(paired).collect();

    let candidates: Vec<(&str, (f64, f64))> = allocators
        .iter()
        .filter_map(|a| Some((a.name.as_str(), (a.sharpe.mean.value()?, a.cvar.mean.value()?))))
        .collect();
    let points: Vec<(f64, f64)> = candidates.iter().map(|c| c.1).collect();
    let pareto = pareto_frontier(&points).into_iter().map(|i| candidates[i].0.to_string()).collect();

    let report = EvaluationReport { seeds: seeds.clone(), benchmark, allocators, tests, pareto };
    write_json(&out.join("metrics.json"), &MetricsDocument::Evaluate(report.clone()))?;
    write_json(&out.join("manifest.json"), &Manifest::new("evaluate", cfg, seeds))?;
    Ok(report)
}

fn metrics_row(name: &str, seed: Option<u64>, m: &folio_core::metrics::MetricsReport) -> String {
    let seed = seed.map_or_else(|| "-".to_string(), |s| s.to_string());
    format!(
        "| {name} | {seed} | {:.6} | {:.4} | {:.4} | {:.4} | {:.4} | {:.6} | {:.6} |\n",
        m.compounded_return, m.sharpe, m.sortino, m.omega, m.calmar, m.mdd, m.cvar
    )
}

const TABLE_HEADER: &str = "| allocator | seed | return | sharpe | sortino | omega | calmar | mdd | cvar |\n|---|---|---|---|---|---|---|---|---|\n";

/// Re-renders `metrics.json` (and `tuning.json` when present) in `dir` as
/// a Markdown summary, writes it to `summary.md` and returns it.
pub fn report(dir: &Path) -> Result<String> {
    let metrics_path = dir.join("metrics.json");
    let tuning_path = dir.join("tuning.json");
    let mut md = String::new();
    if metrics_path.is_file() {
        match read_json::<MetricsDocument>(&metrics_path)? {
            MetricsDocument::Backtest { run } => {
                md.push_str("# Backtest\n\n");
                md.push_str(TABLE_HEADER);
                md.push_str(&metrics_row(&run.allocator, run.seed, &run.metrics));
                md.push_str("\n| step | first day | cost | information ratio |\n|---|---|---|---|\n");
                for s in &run.steps {
                    md.push_str(&format!("| {} | {} | {:.6} | {:.4} |\n", s.step, s.first_date, s.cost, s.information_ratio));
                }
            }
            MetricsDocument::Evaluate(ev) => {
                md.push_str(&format!("# Evaluation over {} seeds\n\n", ev.seeds.len()));
                md.push_str(TABLE_HEADER);
                md.push_str(&metrics_row("benchmark", None, &ev.benchmark.metrics));
                for a in &ev.allocators {
                    for r in &a.runs {
                        md.push_str(&metrics_row(&a.name, r.seed, &r.metrics));
                    }
                }
                md.push_str("\n| allocator | mean sharpe | sd | beats benchmark |\n|---|---|---|---|\n");
                for a in &ev.allocators {
                    md.push_str(&format!(
                        "| {} | {:.4} | {:.4} | {}/{} |\n",
                        a.name, a.sharpe.mean, a.sharpe.sd, a.beats_benchmark, a.runs.len()
                    ));
                }
                if !ev.tests.is_empty() {
                    md.push_str("\n| test | a | b | t | p | p (Bonferroni) |\n|---|---|---|---|---|---|\n");
                    for t in &ev.tests {
                        md.push_str(&format!("| {} | {} | {} | {:.3} | {} | {} |\n", t.family, t.a, t.b, t.t, t.p, t.p_adjusted));
                    }
                }
                md.push_str(&format!("\nPareto frontier: {}\n", ev.pareto.join(", ")));
            }
        }
    }
    if tuning_path.is_file() {
        let t: TuningReport = read_json(&tuning_path)?;
        if !md.is_empty() {
            md.push('\n');
        }
        md.push_str(&format!(
            "# Tuning of {}\n\n{} trials ({} failed), best trial {} with maximin objective {}\n\nPareto trials: {:?}\n",
            t.target,
            t.budget,
            t.n_failed,
            t.best.trial.index,
            t.best.trial.objective.map_or("undefined".to_string(), |o| o.to_string()),
            t.pareto
        ));
    }
    if md.is_empty() {
        return Err(FolioError::Config(format!("{} holds no metrics.json or tuning.json", dir.display())));
    }
    write_atomic(&dir.join("summary.md"), md.as_bytes())?;
    Ok(md)
}
