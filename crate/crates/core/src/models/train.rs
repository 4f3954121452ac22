//! Minibatch Adam training for the built-in classifier family.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::loss::cross_entropy;
use super::network::{softmax, Architecture, Classifier, Label, Params};
use crate::error::{invalid, Result};
use crate::imgmath::{Image, CHANNELS};

const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub image: Image,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 30,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub epochs: usize,
}

/// He-normal convolution and dense weights, zero biases.
pub fn initialize(arch: Architecture, seed: u64) -> Result<Classifier> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params::zeros(&arch);
    let mut fill = |t: &mut Vec<f64>, fan_in: usize| {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        t.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
    };
    fill(&mut p.conv1_w, CHANNELS * 9);
    fill(&mut p.conv2_w, arch.conv1 * 9);
    fill(&mut p.dense_w, arch.conv2);
    Classifier::new(arch, p)
}

/// Fraction of `data` the model labels correctly, and its mean cross-entropy.
pub fn evaluate_accuracy(model: &Classifier, data: &[LabeledImage]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(invalid("cannot evaluate on an empty dataset"));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for s in data {
        let logits = model.forward(&s.image)?;
        loss += cross_entropy(&logits, s.label);
        let pred = if logits[1] > logits[0] { Label::Real } else { Label::Fake };
        correct += usize::from(pred == s.label);
    }
    Ok((correct as f64 / data.len() as f64, loss / data.len() as f64))
}

pub fn train_detector(
    data: &[LabeledImage],
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<(Classifier, TrainReport)> {
    let has = |l: Label| data.iter().any(|s| s.label == l);
    if !has(Label::Real) || !has(Label::Fake) {
        return Err(invalid("training data must contain both real and fake images"));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(invalid("batch_size and learning_rate must be positive"));
    }
    if !((0.0..1.0).contains(&cfg.beta1) && (0.0..1.0).contains(&cfg.beta2)) {
        return Err(invalid("Adam betas must lie in [0, 1)"));
    }
    let mut model = initialize(arch, cfg.seed)?;
    if cfg.epochs > 0 {
        let mut master = model.params().clone();
        let mut first = Params::zeros(&arch);
        let mut second = Params::zeros(&arch);
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_5a3d);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let current = Classifier::new(arch, master.clone())?;
                let mut grads = Params::zeros(&arch);
                for &i in batch {
                    let s = &data[i];
                    let tr = current.trace(&s.image)?;
                    let mut d = softmax(&tr.logits);
                    d[s.label.index()] -= 1.0;
                    current.backward(&s.image, &tr, &d, Some(&mut grads));
                }
                let scale = 1.0 / batch.len() as f64;
                step += 1;
                let c1 = 1.0 - cfg.beta1.powi(step);
                let c2 = 1.0 - cfg.beta2.powi(step);
                for (((w, m), v), g) in master
                    .tensors_mut()
                    .into_iter()
                    .zip(first.tensors_mut())
                    .zip(second.tensors_mut())
                    .zip(grads.tensors())
                {
                    for (((wi, mi), vi), gi) in w.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                        let gi = gi * scale;
                        *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
                        *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
                        *wi -= cfg.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        model = Classifier::new(arch, master)?;
    }
    let (accuracy, mean_loss) = evaluate_accuracy(&model, data)?;
    Ok((
        model,
        TrainReport {
            accuracy,
            mean_loss,
            epochs: cfg.epochs,
        },
    ))
}
