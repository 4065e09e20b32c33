//! Hyperparameter selection and significance testing.
//!
//! Trials are scored by the maximin objective: the one-sided 95% lower
//! confidence bound of the mean per-step Information Ratio.

mod pareto;
mod search;
mod stats;

pub use pareto::pareto_frontier;
pub use search::{
    child_seed, maximin_objective, random_search, Continuous, Hyperparameters, IntRange,
    SearchSpace, TrialResult, LAMBDA_GRID,
};
pub use stats::{
    bonferroni, one_sample_t_test, paired_t_test, regularized_incomplete_beta, student_t_cdf,
    student_t_sf, t_critical, t_test_from_summary, Side, TTest,
};
