//! Mini-batch AdamW training of softmax allocators on a composite loss.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AllocatorSpec, TrainedAllocator};
use crate::diff::Tape;
use crate::linalg::covariance;
use crate::losses::{custom_loss_with_var_level, shrink_covariance, var_level};
use crate::math;
use crate::walkforward::{generate_training_samples, WalkForwardPlan};
use crate::{Error, FeaturePanel, Result, ReturnsPanel};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One stride-1 training example borrowed from the panels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample<'a> {
    /// Panel row of the first input day.
    pub start: usize,
    /// Row-major `t_in × F` features.
    pub input: &'a [f64],
    /// Row-major `t_out × N` returns immediately after the input.
    pub target: &'a [f64],
}

/// Mean composite loss over a batch and its gradient with respect to the
/// flattened parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// VaR level used for each sample.
    pub var_levels: Vec<f64>,
}

/// Evaluates the configured loss of `model` on `samples`. The risk-parity
/// term uses the shrunk covariance of each sample's target window. Pass
/// `var_levels` to hold the VaR levels fixed instead of estimating them.
pub fn batch_loss(
    model: &TrainedAllocator,
    samples: &[TrainingSample<'_>],
    var_levels: Option<&[f64]>,
) -> Result<BatchLoss> {
    if samples.is_empty() {
        return Err(Error::shape("empty batch"));
    }
    if var_levels.is_some_and(|z| z.len() != samples.len()) {
        return Err(Error::shape("one VaR level per sample required"));
    }
    let cfg = &model.spec.loss;
    let kind = model.spec.training.loss_kind;
    let n = model.n_assets;
    let mut tape = Tape::new();
    let p = model.bind(&mut tape);
    let mut total = None;
    let mut zetas = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if s.target.len() % n != 0 {
            return Err(Error::shape("target window is not a whole number of rows"));
        }
        let t_out = s.target.len() / n;
        let w = model.forward(&mut tape, &p, s.input)?;
        let rows = tape.constant(s.target);
        let r = tape.matvec(rows, w, t_out)?;
        let sigma = shrink_covariance(&covariance(s.target, n)?, cfg.shrinkage)?;
        let zeta = match var_levels {
            Some(z) => tape.constant(&[z[i]]),
            None => var_level(&mut tape, r, cfg)?,
        };
        zetas.push(tape.scalar(zeta)?);
        let b = custom_loss_with_var_level(kind, &mut tape, r, w, &sigma, cfg, zeta)?;
        total = Some(match total {
            None => b.total,
            Some(acc) => tape.add(acc, b.total)?,
        });
    }
    let mean = tape.scale(total.expect("non-empty batch"), 1.0 / samples.len() as f64)?;
    let value = tape.scalar(mean)?;
    let gradient = tape.gradient(mean, &p)?.concat();
    Ok(BatchLoss { value, gradient, var_levels: zetas })
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(ADAM_BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(ADAM_BETA2, self.t as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let update = (*m / c1) / (math::sqrt(*v / c2) + ADAM_EPS);
            *p -= lr * (update + weight_decay * *p);
        }
    }
}

fn clip_global_norm(g: &mut [f64], max_norm: f64) {
    let norm = math::sqrt(g.iter().map(|x| x * x).sum());
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Trains from the allocator's seeded initialization on prepared samples.
pub fn train_on_samples(
    spec: &AllocatorSpec,
    samples: &[TrainingSample<'_>],
    n_assets: usize,
    n_features: usize,
    t_in: usize,
) -> Result<TrainedAllocator> {
    spec.validate()?;
    let mut model = TrainedAllocator::initialize(spec, n_assets, n_features, t_in)?;
    let cfg = &spec.training;
    if cfg.epochs == 0 {
        return Ok(model);
    }
    if samples.is_empty() {
        return Err(Error::shape("no training samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.expect("validated"));
    rng.set_stream(1);
    let mut flat = model.params.flatten();
    let mut opt = AdamW::new(flat.len());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|i| samples[*i]));
            let mut out = batch_loss(&model, &batch, None).map_err(|e| match e {
                Error::Domain(m) | Error::Numerical(m) => Error::TrainingDiverged { epoch, reason: m },
                e => e,
            })?;
            if !out.value.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    reason: format!("loss is {}", out.value),
                });
            }
            if out.gradient.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    reason: "non-finite gradient".into(),
                });
            }
            epoch_loss += out.value * chunk.len() as f64;
            clip_global_norm(&mut out.gradient, cfg.clip_norm);
            opt.step(&mut flat, &out.gradient, cfg.learning_rate, cfg.weight_decay);
            model.params.assign(&flat)?;
        }
        let mean = epoch_loss / samples.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        model.loss_trace.push(mean);
    }
    Ok(model)
}

/// Trains on every stride-spaced sample the panels contain.
pub fn train_allocator(
    spec: &AllocatorSpec,
    features: &FeaturePanel,
    returns: &ReturnsPanel,
    plan: &WalkForwardPlan,
) -> Result<TrainedAllocator> {
    let upto = *returns
        .dates()
        .last()
        .ok_or_else(|| Error::shape("empty returns panel"))?;
    let samples = generate_training_samples(features, returns, plan, upto)?;
    train_on_samples(spec, &samples, returns.n_cols(), features.n_cols(), plan.t_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocators::AllocatorKind;
    use crate::diff::{compare_gradients, finite_difference_gradient};
    use crate::losses::LossKind;
    use rand::Rng;

    struct Data {
        n: usize,
        f: usize,
        returns: Vec<f64>,
        features: Vec<f64>,
    }

    /// Asset 0 drifts at daily Sharpe `3/√252`; features are lagged
    /// returns plus noise.
    fn data(seed: u64, n: usize, t: usize) -> Data {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = move || {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
        };
        let vol = 0.01;
        let mut returns = Vec::with_capacity(t * n);
        for _ in 0..t {
            let market = 0.5 * vol * normal();
            for i in 0..n {
                let drift = if i == 0 { 3.0 * vol / 252f64.sqrt() } else { 0.0 };
                returns.push(drift + market + vol * normal());
            }
        }
        let mut features = Vec::with_capacity(t * n);
        for d in 0..t {
            for i in 0..n {
                let lag = if d == 0 { 0.0 } else { returns[(d - 1) * n + i] };
                features.push(lag / vol + 0.1 * normal());
            }
        }
        Data { n, f: n, returns, features }
    }

    fn samples(d: &Data, t_in: usize, t_out: usize) -> Vec<TrainingSample<'_>> {
        let t = d.returns.len() / d.n;
        (0..=t - t_in - t_out)
            .map(|s| TrainingSample {
                start: s,
                input: &d.features[s * d.f..(s + t_in) * d.f],
                target: &d.returns[(s + t_in) * d.n..(s + t_in + t_out) * d.n],
            })
            .collect()
    }

    fn spec(kind: AllocatorKind, seed: u64) -> AllocatorSpec {
        let mut s = AllocatorSpec::trainable(kind, seed);
        s.training.epochs = 20;
        s.training.learning_rate = 0.01;
        s.training.loss_kind = LossKind::A;
        s
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let d = data(1, 3, 80);
        let mut s = spec(AllocatorKind::TrainableLinear, 4);
        s.training.epochs = 0;
        let m = train_on_samples(&s, &samples(&d, 5, 20), 3, 3, 5).unwrap();
        assert_eq!(m, TrainedAllocator::initialize(&s, 3, 3, 5).unwrap());
        assert!(m.loss_trace.is_empty());
    }

    #[test]
    fn learns_the_high_sharpe_asset() {
        let d = data(7, 4, 600);
        let sm = samples(&d, 5, 40);
        let s = spec(AllocatorKind::TrainableLinear, 9);
        let init = TrainedAllocator::initialize(&s, 4, 4, 5).unwrap();
        let m = train_on_samples(&s, &sm, 4, 4, 5).unwrap();

        let mean_w0 = |m: &TrainedAllocator| {
            sm.iter().map(|x| m.predict_weights(x.input).unwrap().weights()[0]).sum::<f64>() / sm.len() as f64
        };
        assert!(mean_w0(&m) > 2.0 * 0.25, "w0 = {}", mean_w0(&m));
        let before = batch_loss(&init, &sm, None).unwrap().value;
        let after = batch_loss(&m, &sm, None).unwrap().value;
        assert!(after < before);

        let trace = &m.loss_trace;
        assert!(trace.iter().all(|x| x.is_finite()));
        let down = trace.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(down * 5 >= 4 * (trace.len() - 1), "{trace:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let d = data(3, 3, 120);
        let sm = samples(&d, 4, 20);
        for kind in [AllocatorKind::TrainableLinear, AllocatorKind::TrainableRecurrent] {
            let mut s = spec(kind, 5);
            s.training.epochs = 2;
            s.training.hidden_size = 4;
            let a = train_on_samples(&s, &sm, 3, 3, 4).unwrap();
            let b = train_on_samples(&s, &sm, 3, 3, 4).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn divergence_reports_epoch() {
        let d = data(3, 2, 60);
        let mut s = spec(AllocatorKind::TrainableLinear, 5);
        s.training.learning_rate = 1e300;
        s.training.weight_decay = 1e300;
        let err = train_on_samples(&s, &samples(&d, 3, 20), 2, 2, 3).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { epoch: 0 | 1, .. }), "{err:?}");
    }

    /// Gradient of the whole pipeline (features → softmax → portfolio
    /// returns → composite loss) against central differences, with the VaR
    /// levels frozen at the base point.
    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let d = {
            let mut d = data(21, 2, 60);
            // four features per day: duplicate the two lagged returns, scaled
            d.features = d.features.chunks(2).flat_map(|r| [r[0], r[1], 0.5 * r[0] - r[1], r[1] * 0.3]).collect();
            d.f = 4;
            d
        };
        let sm = samples(&d, 3, 20);
        for kind in [AllocatorKind::TrainableLinear, AllocatorKind::TrainableRecurrent] {
            for loss_kind in [LossKind::A, LossKind::B] {
                let mut s = spec(kind, 13);
                s.training.hidden_size = 3;
                s.training.loss_kind = loss_kind;
                s.loss.lambda_cvar = 0.1;
                s.loss.lambda_rp = 0.1;
                let m = TrainedAllocator::initialize(&s, 2, 4, 3).unwrap();
                let batch = &sm[..8];
                let base = batch_loss(&m, batch, None).unwrap();
                let fd = finite_difference_gradient(
                    |x| {
                        let mut mm = m.clone();
                        mm.params.assign(x)?;
                        Ok(batch_loss(&mm, batch, Some(&base.var_levels))?.value)
                    },
                    &m.params.flatten(),
                    1e-5,
                )
                .unwrap();
                let cmp = compare_gradients(&base.gradient, &fd);
                assert!(cmp.passes(1e-5, 1e-8), "{kind:?}/{loss_kind:?}: {cmp:?}");
            }
        }
    }
}
