//! Trainable softmax allocators: a linear map of the flattened window and
//! a minimal recurrent cell.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AllocatorKind, AllocatorSpec};
use crate::diff::{Tape, Var};
use crate::math;
use crate::{validate_weights, Error, Result, WeightVector};

/// Format version written into checkpoints.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Recurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn new(name: &str, shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self { name: name.to_string(), shape, data }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub tensors: Vec<Tensor>,
}

impl Parameters {
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Overwrites all values from a flat vector in tensor order.
    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.count() {
            return Err(Error::shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.count()
            )));
        }
        let mut at = 0;
        for t in &mut self.tensors {
            let n = t.data.len();
            t.data.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) allocator and its loss history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAllocator {
    pub version: u32,
    pub spec: AllocatorSpec,
    pub model: ModelKind,
    pub n_assets: usize,
    pub n_features: usize,
    pub t_in: usize,
    pub params: Parameters,
    /// Mean training loss of each epoch.
    pub loss_trace: Vec<f64>,
}

fn model_kind(kind: AllocatorKind) -> Result<ModelKind> {
    match kind {
        AllocatorKind::TrainableLinear => Ok(ModelKind::Linear),
        AllocatorKind::TrainableRecurrent => Ok(ModelKind::Recurrent),
        k => Err(Error::Config(format!("{} is not trainable", k.name()))),
    }
}

fn shapes(model: ModelKind, n: usize, f: usize, t_in: usize, h: usize) -> Vec<(&'static str, Vec<usize>)> {
    match model {
        ModelKind::Linear => vec![("w", vec![n, t_in * f]), ("b", vec![n])],
        ModelKind::Recurrent => vec![
            ("wx", vec![h, f]),
            ("wh", vec![h, h]),
            ("bh", vec![h]),
            ("wo", vec![n, h]),
            ("bo", vec![n]),
        ],
    }
}

impl TrainedAllocator {
    /// Seeded initialization: matrices uniform in `±1/√fan_in`, biases zero.
    pub fn initialize(spec: &AllocatorSpec, n_assets: usize, n_features: usize, t_in: usize) -> Result<Self> {
        let mut m = Self::zeroed(spec, n_assets, n_features, t_in)?;
        let seed = spec
            .training
            .seed
            .ok_or_else(|| Error::Config("trainable allocators need a seed".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut m.params.tensors {
            if t.shape.len() == 2 {
                let bound = 1.0 / math::sqrt(t.shape[1] as f64);
                t.data.iter_mut().for_each(|x| *x = rng.random_range(-bound..bound));
            }
        }
        Ok(m)
    }

    /// All parameters zero; predicts equal weights for any window.
    pub fn zeroed(spec: &AllocatorSpec, n_assets: usize, n_features: usize, t_in: usize) -> Result<Self> {
        let model = model_kind(spec.kind)?;
        if n_assets < 1 || n_features < 1 || t_in < 1 {
            return Err(Error::shape("model dimensions must be positive"));
        }
        let tensors = shapes(model, n_assets, n_features, t_in, spec.training.hidden_size)
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                Tensor::new(name, shape, vec![0.0; len])
            })
            .collect();
        Ok(Self {
            version: CHECKPOINT_VERSION,
            spec: spec.clone(),
            model,
            n_assets,
            n_features,
            t_in,
            params: Parameters { tensors },
            loss_trace: Vec::new(),
        })
    }

    /// Consistency of a deserialized checkpoint.
    pub fn check(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if model_kind(self.spec.kind)? != self.model {
            return Err(Error::Config("checkpoint model does not match its spec".into()));
        }
        let want = shapes(self.model, self.n_assets, self.n_features, self.t_in, self.spec.training.hidden_size);
        let ok = want.len() == self.params.tensors.len()
            && want.iter().zip(&self.params.tensors).all(|((name, shape), t)| {
                t.name == *name && t.shape == *shape && t.data.len() == shape.iter().product::<usize>()
            });
        if !ok {
            return Err(Error::shape("checkpoint tensors do not match the model shape"));
        }
        if self.params.tensors.iter().any(|t| t.data.iter().any(|x| !x.is_finite()))
            || self.loss_trace.iter().any(|x| !x.is_finite())
        {
            return Err(Error::Numerical("checkpoint holds non-finite values".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.t_in * self.n_features
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.window_len() {
            return Err(Error::shape(format!(
                "window of {} values, model expects {}x{}",
                window.len(),
                self.t_in,
                self.n_features
            )));
        }
        Ok(())
    }

    /// Registers every tensor as a tape input, in tensor order.
    pub(crate) fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.tensors.iter().map(|t| tape.input(&t.data)).collect()
    }

    /// Softmax weights for one flattened `t_in × F` window.
    pub(crate) fn forward(&self, tape: &mut Tape, p: &[Var], window: &[f64]) -> Result<Var> {
        self.check_window(window)?;
        let logits = match self.model {
            ModelKind::Linear => {
                let x = tape.constant(window);
                let z = tape.matvec(p[0], x, self.n_assets)?;
                tape.add(z, p[1])?
            }
            ModelKind::Recurrent => {
                let h_size = self.spec.training.hidden_size;
                let f = self.n_features;
                let mut h = tape.constant(&vec![0.0; h_size]);
                for row in window.chunks_exact(f) {
                    let x = tape.constant(row);
                    let a = tape.matvec(p[0], x, h_size)?;
                    let b = tape.matvec(p[1], h, h_size)?;
                    let s = tape.add(a, b)?;
                    let s = tape.add(s, p[2])?;
                    h = tape.tanh(s)?;
                }
                let z = tape.matvec(p[3], h, self.n_assets)?;
                tape.add(z, p[4])?
            }
        };
        tape.softmax(logits)
    }

    pub fn predict_weights(&self, window: &[f64]) -> Result<WeightVector> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let w = self.forward(&mut tape, &p, window)?;
        let raw = tape.value(w)?;
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("model produced non-finite weights".into()));
        }
        // renormalize away softmax rounding so the simplex check is tight
        let s: f64 = raw.iter().sum();
        validate_weights(&raw.iter().map(|x| x / s).collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(len: usize) -> Vec<f64> {
        (0..len).map(|i| ((i * 7919) % 13) as f64 / 6.0 - 1.0).collect()
    }

    #[test]
    fn zeroed_model_predicts_equal_weights() {
        for kind in [AllocatorKind::TrainableLinear, AllocatorKind::TrainableRecurrent] {
            let spec = AllocatorSpec::trainable(kind, 0);
            let m = TrainedAllocator::zeroed(&spec, 5, 3, 4).unwrap();
            let w = m.predict_weights(&window(12)).unwrap();
            for x in w.weights() {
                assert!((x - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn prediction_is_valid_and_deterministic() {
        for kind in [AllocatorKind::TrainableLinear, AllocatorKind::TrainableRecurrent] {
            let spec = AllocatorSpec::trainable(kind, 42);
            let m = TrainedAllocator::initialize(&spec, 4, 3, 6).unwrap();
            let x = window(18);
            let a = m.predict_weights(&x).unwrap();
            let b = m.predict_weights(&x).unwrap();
            assert_eq!(a, b);
            assert!(validate_weights(a.weights()).is_ok());
            assert_eq!(m, TrainedAllocator::initialize(&spec, 4, 3, 6).unwrap());
            assert!(matches!(m.predict_weights(&x[1..]), Err(Error::Shape(_))));
        }
    }

    #[test]
    fn checkpoint_round_trip_and_check() {
        let spec = AllocatorSpec::trainable(AllocatorKind::TrainableRecurrent, 3);
        let mut m = TrainedAllocator::initialize(&spec, 3, 2, 5).unwrap();
        m.loss_trace = vec![0.5, 0.4];
        let json = serde_json::to_string(&m).unwrap();
        let back: TrainedAllocator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        back.check().unwrap();

        let mut bad = m.clone();
        bad.params.tensors[1].shape = vec![1, 1];
        assert!(bad.check().is_err());
        let mut bad = m;
        bad.version = 99;
        assert!(matches!(bad.check(), Err(Error::Config(_))));
    }

    #[test]
    fn assign_round_trips_flat_parameters() {
        let spec = AllocatorSpec::trainable(AllocatorKind::TrainableLinear, 8);
        let mut m = TrainedAllocator::initialize(&spec, 2, 2, 2).unwrap();
        let flat = m.params.flatten();
        let mut p = m.params.clone();
        p.assign(&flat).unwrap();
        assert_eq!(p, m.params);
        assert!(m.params.assign(&flat[1..]).is_err());
    }
}
