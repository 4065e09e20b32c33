//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! out_dir = "out"
//! eval_seeds = [0, 1, 2]
//!
//! [data]
//! source = "synthetic"
//! n_assets = 10
//! n_days = 1500
//! seed = 7
//!
//! [plan]
//! t_in = 60
//! t_out = 60
//! k = 4
//!
//! [loss]
//! lambda_cvar = 0.01
//! lambda_rp = 0.01
//!
//! [[allocators]]
//! kind = "equal_weight"
//!
//! [[allocators]]
//! kind = "trainable_linear"
//! training = { epochs = 5 }
//! ```

use std::path::{Path, PathBuf};

use folio_core::allocators::{AllocatorKind, AllocatorSpec, Linkage, NcoObjective, TrainingConfig};
use folio_core::tuning::SearchSpace;
use folio_core::walkforward::WalkForwardPlan;
use folio_core::LossConfig;
use serde::{Deserialize, Serialize};

use crate::error::{FolioError, Result};
use crate::synth::Regime;

pub const SCHEMA_VERSION: u32 = 1;

/// Number of evaluation seeds when none are configured.
pub const DEFAULT_EVAL_SEEDS: u64 = 30;

fn default_seeds() -> Vec<u64> {
    (0..DEFAULT_EVAL_SEEDS).collect()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Wide CSV files; relative paths resolve against the config file.
    Csv {
        returns: PathBuf,
        spreads: PathBuf,
        features: PathBuf,
    },
    Synthetic {
        n_assets: usize,
        n_days: usize,
        seed: u64,
        #[serde(default)]
        regime: Regime,
    },
}

/// One allocator entry. A missing `loss` table inherits the run-level one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocatorEntry {
    /// Label used in output file names; defaults to the kind.
    #[serde(default)]
    pub name: Option<String>,
    pub kind: AllocatorKind,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub loss: Option<LossConfig>,
    #[serde(default)]
    pub risk_aversion: Option<f64>,
    #[serde(default)]
    pub n_clusters: Option<usize>,
    #[serde(default)]
    pub linkage: Linkage,
    #[serde(default)]
    pub nco_objective: NcoObjective,
    #[serde(default)]
    pub clustering_seed: u64,
}

impl AllocatorEntry {
    pub fn new(kind: AllocatorKind) -> Self {
        Self {
            name: None,
            kind,
            training: TrainingConfig::default(),
            loss: None,
            risk_aversion: None,
            n_clusters: None,
            linkage: Linkage::default(),
            nco_objective: NcoObjective::default(),
            clustering_seed: 0,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    /// The core spec, with the run-level loss filled in where needed.
    pub fn to_spec(&self, run_loss: &LossConfig) -> AllocatorSpec {
        let mut spec = AllocatorSpec::new(self.kind);
        spec.training = self.training;
        spec.loss = self.loss.unwrap_or(*run_loss);
        if let Some(a) = self.risk_aversion {
            spec.risk_aversion = a;
        }
        spec.n_clusters = self.n_clusters;
        spec.linkage = self.linkage;
        spec.nco_objective = self.nco_objective;
        spec.clustering_seed = self.clustering_seed;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Name of the allocator entry to tune.
    pub target: String,
    pub budget: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub space: SearchSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub eval_seeds: Vec<u64>,
    pub data: DataSource,
    /// Robust-scale features on the pre-evaluation range.
    #[serde(default = "yes")]
    pub scale_features: bool,
    #[serde(default)]
    pub plan: WalkForwardPlan,
    #[serde(default)]
    pub loss: LossConfig,
    pub allocators: Vec<AllocatorEntry>,
    #[serde(default)]
    pub search: Option<SearchConfig>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|source| FolioError::Toml { path: path.to_path_buf(), source })?;
        if let DataSource::Csv { returns, spreads, features } = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new(""));
            for p in [returns, spreads, features] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FolioError::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    /// Static checks; file existence is checked when the data is loaded.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FolioError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.eval_seeds.is_empty() {
            return bad("eval_seeds must not be empty".into());
        }
        if self.allocators.is_empty() {
            return bad("at least one [[allocators]] entry is required".into());
        }
        let labels: Vec<String> = self.allocators.iter().map(AllocatorEntry::label).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return bad(format!("duplicate allocator name {l:?}"));
            }
            if l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("allocator name {l:?} must be non-empty [A-Za-z0-9_-]"));
            }
        }
        self.plan.validate()?;
        self.loss.validate()?;
        for e in &self.allocators {
            let mut spec = e.to_spec(&self.loss);
            spec.training.seed.get_or_insert(self.eval_seeds[0]);
            spec.validate()?;
        }
        if let Some(s) = &self.search {
            let Some(entry) = self.allocator(&s.target) else {
                return bad(format!("search target {:?} is not an allocator name", s.target));
            };
            if !entry.kind.is_trainable() {
                return bad(format!("search target {:?} is not trainable", s.target));
            }
            if s.budget == 0 {
                return bad("search budget must be >= 1".into());
            }
            s.space.validate()?;
        }
        Ok(())
    }

    pub fn allocator(&self, name: &str) -> Option<&AllocatorEntry> {
        self.allocators.iter().find(|e| e.label() == name)
    }

    /// Canonical JSON rendering used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
