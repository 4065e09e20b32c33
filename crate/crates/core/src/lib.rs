//! End-to-end portfolio optimization primitives.
//!
//! `folio-core` is `no_std` (it needs `alloc`). It contains:
//!
//! - [`panel`] and [`portfolio`]: return/spread/feature panels, the long-only
//!   weight simplex and daily portfolio returns.
//! - [`diff`]: a small reverse-mode automatic differentiation tape.
//! - [`losses`]: smooth Sharpe, smooth Omega, the Rockafellar–Uryasev CVaR
//!   regularizer, the risk-parity regularizer, and their composites.
//! - [`metrics`]: full-period evaluation metrics on net return series.
//! - [`allocators`]: equal weight, GMV/MVP, HRP, NCO and trainable softmax
//!   allocators.
//! - [`walkforward`]: the expanding-window walk-forward engine with bid-ask
//!   transaction costs.
//! - [`tuning`]: maximin Information-Ratio search, Pareto selection and
//!   Student-t tests.
//!
//! File formats, data generation and the command line live in the `folio`
//! crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod allocators;
pub mod diff;
mod error;
pub mod linalg;
pub mod losses;
mod math;
pub mod metrics;
pub mod panel;
pub mod portfolio;
pub mod tuning;
pub mod walkforward;

pub use error::{Error, Result};
pub use losses::LossConfig;
pub use panel::{FeaturePanel, NetReturnSeries, ReturnsPanel, SpreadPanel};
pub use portfolio::{portfolio_returns, validate_weights, WeightVector};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Trading days per year used for annualization.
pub const TRADING_DAYS: f64 = 252.0;
