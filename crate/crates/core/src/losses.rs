//! Differentiable portfolio losses expressed on a [`Tape`].
//!
//! Every loss is minimized. The primary objectives are negative logs of
//! smoothed Sharpe and Omega ratios; the regularizers penalize tail losses
//! (Rockafellar–Uryasev CVaR with a stop-gradient VaR level) and unequal
//! risk contributions.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::diff::{Tape, Var};
use crate::linalg::Matrix;
use crate::math;
use crate::{Error, Result};

/// Loss-side hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the CVaR regularizer.
    pub lambda_cvar: f64,
    /// Weight of the risk-parity regularizer.
    pub lambda_rp: f64,
    /// Tail fraction, in (0, 0.5].
    pub alpha: f64,
    /// Omega threshold.
    pub theta: f64,
    /// Denominator floor.
    pub epsilon: f64,
    /// Softplus sharpness, shared by every softplus.
    pub beta: f64,
    /// Covariance shrinkage intensity towards the diagonal, in [0, 1].
    pub shrinkage: f64,
    /// Always zero.
    pub risk_free_rate: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_cvar: 0.0,
            lambda_rp: 0.0,
            alpha: 0.05,
            theta: 0.0,
            epsilon: 1e-8,
            beta: 1.0,
            shrinkage: 0.1,
            risk_free_rate: 0.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("loss config: {what}")));
        if !(self.lambda_cvar >= 0.0 && self.lambda_cvar.is_finite()) {
            return bad("lambda_cvar must be >= 0");
        }
        if !(self.lambda_rp >= 0.0 && self.lambda_rp.is_finite()) {
            return bad("lambda_rp must be >= 0");
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return bad("alpha must lie in (0, 0.5]");
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be > 0");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be > 0");
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return bad("shrinkage must lie in [0, 1]");
        }
        if self.risk_free_rate != 0.0 {
            return bad("risk_free_rate must be 0");
        }
        Ok(())
    }
}

/// Which primary objective a composite loss uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Smooth Sharpe + CVaR + risk parity.
    A,
    /// Smooth Omega + CVaR + risk parity.
    B,
}

/// `−log(softplus(μ / (σ + ε)))` with population σ.
pub fn smooth_sharpe_loss(tape: &mut Tape, r: Var, cfg: &LossConfig) -> Result<Var> {
    let mu = tape.mean(r)?;
    let sigma = tape.stddev(r)?;
    let den = tape.shift(sigma, cfg.epsilon)?;
    let ratio = tape.div(mu, den)?;
    let sp = tape.softplus(ratio, cfg.beta)?;
    let l = tape.ln(sp)?;
    tape.neg(l)
}

/// `−log(mean(softplus(r − θ)) / (mean(softplus(θ − r)) + ε))`.
pub fn smooth_omega_loss(tape: &mut Tape, r: Var, cfg: &LossConfig) -> Result<Var> {
    let gains = tape.shift(r, -cfg.theta)?;
    let gains = tape.softplus(gains, cfg.beta)?;
    let up = tape.mean(gains)?;
    let losses = tape.neg(r)?;
    let losses = tape.shift(losses, cfg.theta)?;
    let losses = tape.softplus(losses, cfg.beta)?;
    let down = tape.mean(losses)?;
    let down = tape.shift(down, cfg.epsilon)?;
    let ratio = tape.div(up, down)?;
    let l = tape.ln(ratio)?;
    tape.neg(l)
}

/// Zero-based order-statistic index of the VaR level `ζ` among the `t`
/// losses: `⌈(1−α)·t⌉ − 1`.
pub fn var_index(alpha: f64, t: usize) -> usize {
    let k = math::ceil((1.0 - alpha) * t as f64 - 1e-9) as usize;
    k.saturating_sub(1).min(t.saturating_sub(1))
}

fn check_tail(alpha: f64, t: usize) -> Result<()> {
    let need = math::ceil(1.0 / alpha - 1e-9) as usize;
    if t < need.max(2) {
        return Err(Error::shape(format!(
            "CVaR at alpha={alpha} needs at least {need} returns, got {t}"
        )));
    }
    Ok(())
}

/// Detached VaR level of the losses `−r`: the lower empirical
/// `(1−α)`-quantile, carrying no gradient.
pub fn var_level(tape: &mut Tape, r: Var, cfg: &LossConfig) -> Result<Var> {
    check_tail(cfg.alpha, r.len())?;
    let losses = tape.neg(r)?;
    tape.detached_order_statistic(losses, var_index(cfg.alpha, r.len()))
}

/// Smoothed Rockafellar–Uryasev term `ζ + (1/α)·mean(softplus(−r − ζ))`
/// for a given VaR level, before volatility normalization.
pub fn ru_cvar_unnormalized(tape: &mut Tape, r: Var, zeta: Var, cfg: &LossConfig) -> Result<Var> {
    let losses = tape.neg(r)?;
    let excess = tape.sub(losses, zeta)?;
    let sp = tape.softplus(excess, cfg.beta)?;
    let m = tape.mean(sp)?;
    let tail = tape.scale(m, 1.0 / cfg.alpha)?;
    tape.add(zeta, tail)
}

/// CVaR regularizer for an explicit VaR level `zeta`, normalized by
/// `σ_p + ε`.
pub fn cvar_regularizer_at(tape: &mut Tape, r: Var, zeta: Var, cfg: &LossConfig) -> Result<Var> {
    check_tail(cfg.alpha, r.len())?;
    let ru = ru_cvar_unnormalized(tape, r, zeta, cfg)?;
    let sigma = tape.stddev(r)?;
    let den = tape.shift(sigma, cfg.epsilon)?;
    tape.div(ru, den)
}

/// CVaR regularizer with the VaR level estimated from `r` and detached.
pub fn cvar_regularizer(tape: &mut Tape, r: Var, cfg: &LossConfig) -> Result<Var> {
    let zeta = var_level(tape, r, cfg)?;
    cvar_regularizer_at(tape, r, zeta, cfg)
}

/// Covariance matrix after linear shrinkage towards its diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    matrix: Matrix,
    shrinkage: f64,
}

impl CovarianceEstimate {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// `(1−δ)·S + δ·diag(S)`: diagonal kept, off-diagonals scaled by `1−δ`.
pub fn shrink_covariance(sample: &Matrix, delta: f64) -> Result<CovarianceEstimate> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Config(format!(
            "shrinkage intensity {delta} outside [0, 1]"
        )));
    }
    let asym = sample.asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::shape(format!(
            "covariance is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let n = sample.dim();
    let mut m = sample.clone();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                // symmetrize exactly while shrinking
                m[(i, j)] = (1.0 - delta) * 0.5 * (sample[(i, j)] + sample[(j, i)]);
            }
        }
    }
    Ok(CovarianceEstimate {
        matrix: m,
        shrinkage: delta,
    })
}

/// `Σᵢ (RCᵢ − wᵀΣw/N)² / (wᵀΣw)²` with `RCᵢ = wᵢ(Σw)ᵢ`.
pub fn risk_parity_regularizer(tape: &mut Tape, w: Var, sigma: &CovarianceEstimate) -> Result<Var> {
    let n = sigma.dim();
    if w.len() != n {
        return Err(Error::shape(format!(
            "{} weights for a {n}x{n} covariance",
            w.len()
        )));
    }
    let s = tape.constant(sigma.matrix().as_slice());
    let sw = tape.matvec(s, w, n)?;
    let rc = tape.mul(w, sw)?;
    let var = tape.dot(w, sw)?;
    let target = tape.scale(var, 1.0 / n as f64)?;
    let dev = tape.sub(rc, target)?;
    let sq = tape.mul(dev, dev)?;
    let num = tape.sum(sq)?;
    let den = tape.mul(var, var)?;
    tape.div(num, den)
}

/// Tape handles and values of a composite loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub primary: Var,
    pub cvar: Var,
    pub rp: Var,
    pub total: Var,
    pub primary_value: f64,
    pub cvar_value: f64,
    pub rp_value: f64,
    pub total_value: f64,
}

/// `primary + λ_CVaR·cvar + λ_RP·rp` for the chosen primary objective.
pub fn custom_loss(
    kind: LossKind,
    tape: &mut Tape,
    r: Var,
    w: Var,
    sigma: &CovarianceEstimate,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let zeta = var_level(tape, r, cfg)?;
    custom_loss_with_var_level(kind, tape, r, w, sigma, cfg, zeta)
}

/// [`custom_loss`] with the VaR level supplied by the caller.
pub fn custom_loss_with_var_level(
    kind: LossKind,
    tape: &mut Tape,
    r: Var,
    w: Var,
    sigma: &CovarianceEstimate,
    cfg: &LossConfig,
    zeta: Var,
) -> Result<LossBreakdown> {
    let primary = match kind {
        LossKind::A => smooth_sharpe_loss(tape, r, cfg)?,
        LossKind::B => smooth_omega_loss(tape, r, cfg)?,
    };
    let cvar = cvar_regularizer_at(tape, r, zeta, cfg)?;
    let rp = risk_parity_regularizer(tape, w, sigma)?;
    let wc = tape.scale(cvar, cfg.lambda_cvar)?;
    let wr = tape.scale(rp, cfg.lambda_rp)?;
    let total = tape.add(primary, wc)?;
    let total = tape.add(total, wr)?;
    Ok(LossBreakdown {
        primary,
        cvar,
        rp,
        total,
        primary_value: tape.scalar(primary)?,
        cvar_value: tape.scalar(cvar)?,
        rp_value: tape.scalar(rp)?,
        total_value: tape.scalar(total)?,
    })
}

/// Sharpe-based composite.
pub fn custom_loss_a(
    tape: &mut Tape,
    r: Var,
    w: Var,
    sigma: &CovarianceEstimate,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    custom_loss(LossKind::A, tape, r, w, sigma, cfg)
}

/// Omega-based composite.
pub fn custom_loss_b(
    tape: &mut Tape,
    r: Var,
    w: Var,
    sigma: &CovarianceEstimate,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    custom_loss(LossKind::B, tape, r, w, sigma, cfg)
}
