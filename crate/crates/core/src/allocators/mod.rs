//! Weight producers: classical baselines and trainable softmax allocators.

mod baseline;
mod hrp;
mod model;
mod nco;
mod train;

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{column_means, covariance};
use crate::losses::{shrink_covariance, LossConfig, LossKind};
use crate::{Error, Result, WeightVector};

pub use baseline::{equal_weight, gmv_weights, mvp_weights, SIMPLEX_MAX_ITER, SIMPLEX_TOLERANCE};
pub use hrp::{hrp_weights, Linkage};
pub use model::{ModelKind, Parameters, Tensor, TrainedAllocator, CHECKPOINT_VERSION};
pub use nco::{nco_weights, NcoObjective};
pub use train::{batch_loss, train_allocator, train_on_samples, TrainingSample};

/// Which allocator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocatorKind {
    EqualWeight,
    Gmv,
    Mvp,
    Hrp,
    Nco,
    TrainableLinear,
    TrainableRecurrent,
}

impl AllocatorKind {
    pub fn is_trainable(self) -> bool {
        matches!(self, Self::TrainableLinear | Self::TrainableRecurrent)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::EqualWeight => "equal_weight",
            Self::Gmv => "gmv",
            Self::Mvp => "mvp",
            Self::Hrp => "hrp",
            Self::Nco => "nco",
            Self::TrainableLinear => "trainable_linear",
            Self::TrainableRecurrent => "trainable_recurrent",
        }
    }
}

/// Optimizer and architecture settings for trainable allocators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Recurrent state width; ignored by the linear model.
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub loss_kind: LossKind,
    pub seed: Option<u64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            weight_decay: 1e-4,
            hidden_size: 16,
            epochs: 10,
            batch_size: 64,
            clip_norm: 0.5,
            loss_kind: LossKind::A,
            seed: None,
        }
    }
}

/// An allocator together with every hyperparameter it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocatorSpec {
    pub kind: AllocatorKind,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub loss: LossConfig,
    /// Mean-variance trade-off for MVP (and mean-variance NCO).
    #[serde(default = "default_risk_aversion")]
    pub risk_aversion: f64,
    /// NCO cluster count; `None` means `⌈√N⌉`.
    #[serde(default)]
    pub n_clusters: Option<usize>,
    #[serde(default)]
    pub linkage: Linkage,
    #[serde(default)]
    pub nco_objective: NcoObjective,
    /// Seed for the NCO k-means initialization.
    #[serde(default)]
    pub clustering_seed: u64,
}

fn default_risk_aversion() -> f64 {
    1.0
}

impl AllocatorSpec {
    pub fn new(kind: AllocatorKind) -> Self {
        Self {
            kind,
            training: TrainingConfig::default(),
            loss: LossConfig::default(),
            risk_aversion: default_risk_aversion(),
            n_clusters: None,
            linkage: Linkage::default(),
            nco_objective: NcoObjective::default(),
            clustering_seed: 0,
        }
    }

    /// A trainable spec with the given seed.
    pub fn trainable(kind: AllocatorKind, seed: u64) -> Self {
        let mut s = Self::new(kind);
        s.training.seed = Some(seed);
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let bad = |m: &str| Err(Error::Config(format!("{}: {m}", self.kind.name())));
        if !(self.risk_aversion > 0.0 && self.risk_aversion.is_finite()) {
            return bad("risk_aversion must be > 0");
        }
        if self.n_clusters == Some(0) {
            return bad("n_clusters must be >= 1");
        }
        if self.kind.is_trainable() {
            let t = &self.training;
            if t.seed.is_none() {
                return bad("trainable allocators need a seed");
            }
            if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
                return bad("learning_rate must be > 0");
            }
            if !(t.weight_decay >= 0.0 && t.weight_decay.is_finite()) {
                return bad("weight_decay must be >= 0");
            }
            if t.batch_size == 0 {
                return bad("batch_size must be >= 1");
            }
            if !(t.clip_norm > 0.0) {
                return bad("clip_norm must be > 0");
            }
            if self.kind == AllocatorKind::TrainableRecurrent && t.hidden_size == 0 {
                return bad("hidden_size must be >= 1");
            }
        }
        Ok(())
    }
}

/// Weights of a non-trainable allocator estimated on a row-major
/// `T × n` block of returns.
pub fn allocate_from_history(spec: &AllocatorSpec, rows: &[f64], n: usize) -> Result<WeightVector> {
    match spec.kind {
        AllocatorKind::EqualWeight => equal_weight(n),
        AllocatorKind::Gmv => {
            let sigma = shrink_covariance(&covariance(rows, n)?, spec.loss.shrinkage)?;
            gmv_weights(&sigma)
        }
        AllocatorKind::Mvp => {
            let sigma = shrink_covariance(&covariance(rows, n)?, spec.loss.shrinkage)?;
            mvp_weights(&column_means(rows, n), &sigma, spec.risk_aversion)
        }
        AllocatorKind::Hrp => hrp_weights(&covariance(rows, n)?, spec.linkage),
        AllocatorKind::Nco => {
            let sigma = shrink_covariance(&covariance(rows, n)?, spec.loss.shrinkage)?;
            let k = spec.n_clusters.unwrap_or_else(|| default_clusters(n));
            let objective = match spec.nco_objective {
                NcoObjective::MeanVariance { .. } => NcoObjective::MeanVariance {
                    risk_aversion: spec.risk_aversion,
                },
                o => o,
            };
            nco_weights(
                &column_means(rows, n),
                sigma.matrix(),
                k.min(n),
                objective,
                spec.clustering_seed,
            )
        }
        AllocatorKind::TrainableLinear | AllocatorKind::TrainableRecurrent => Err(Error::Config(
            format!("{} must be trained before allocating", spec.kind.name()),
        )),
    }
}

/// `⌈√n⌉`.
pub fn default_clusters(n: usize) -> usize {
    let mut k = 1;
    while k * k < n {
        k += 1;
    }
    k
}

pub(crate) fn normalize(raw: Vec<f64>) -> Result<WeightVector> {
    let clean: Vec<f64> = raw.iter().map(|x| x.max(0.0)).collect();
    let s: f64 = clean.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Numerical("weights do not normalize".into()));
    }
    crate::validate_weights(&clean.iter().map(|x| x / s).collect::<Vec<_>>())
}
