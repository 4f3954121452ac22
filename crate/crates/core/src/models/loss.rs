use serde::{Deserialize, Serialize};

use super::network::{softmax, Classifier, Label};
use crate::error::{invalid, Result};
use crate::imgmath::{ssim_with_grad, GradientField, Image, DEFAULT_WINDOW};

/// Attack objective: targeted cross-entropy plus an SSIM penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub lambda_ssim: f64,
    pub target_label: Label,
    pub ssim_window: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_ssim: 0.3,
            target_label: Label::Real,
            ssim_window: DEFAULT_WINDOW,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ssim >= 0.0) {
            return Err(invalid(format!("lambda_ssim must be >= 0, got {}", self.lambda_ssim)));
        }
        if self.ssim_window.is_multiple_of(2) {
            return Err(invalid(format!("ssim_window must be odd, got {}", self.ssim_window)));
        }
        Ok(())
    }

    pub fn without_ssim(self) -> Self {
        Self {
            lambda_ssim: 0.0,
            ..self
        }
    }
}

/// `-ln softmax(logits)[target]`, computed stably.
pub fn cross_entropy(logits: &[f64; 2], target: Label) -> f64 {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    lse - logits[target.index()]
}

/// Cross-entropy of the model's prediction against `target`.
pub fn loss_misclassification(model: &Classifier, x: &Image, target: Label) -> Result<f64> {
    Ok(cross_entropy(&model.forward(x)?, target))
}

/// `L_mis(x_adv) + lambda * (1 - SSIM(x_orig, x_adv))`.
pub fn total_loss(model: &Classifier, x_orig: &Image, x_adv: &Image, cfg: &LossConfig) -> Result<f64> {
    x_orig.ensure_same_shape(x_adv)?;
    let mis = loss_misclassification(model, x_adv, cfg.target_label)?;
    if cfg.lambda_ssim == 0.0 {
        return Ok(mis);
    }
    let s = crate::imgmath::ssim(x_orig, x_adv, cfg.ssim_window)?;
    Ok(mis + cfg.lambda_ssim * (1.0 - s))
}

/// Gradient of the targeted cross-entropy with respect to the input.
pub fn misclassification_gradient(model: &Classifier, x: &Image, target: Label) -> Result<GradientField> {
    let tr = model.trace(x)?;
    let p = softmax(&tr.logits);
    let mut d = p;
    d[target.index()] -= 1.0;
    Ok(model.backward(x, &tr, &d, None))
}

/// Gradient of `lambda * (1 - SSIM(x_orig, x_adv))` with respect to `x_adv`.
pub fn ssim_penalty_gradient(x_orig: &Image, x_adv: &Image, cfg: &LossConfig) -> Result<GradientField> {
    let (_, g) = ssim_with_grad(x_orig, x_adv, cfg.ssim_window)?;
    let lambda = cfg.lambda_ssim;
    Ok(g.map(|v| -lambda * v))
}

/// Exact gradient of [`total_loss`] with respect to `x_adv`.
pub fn input_gradient(
    model: &Classifier,
    x_orig: &Image,
    x_adv: &Image,
    cfg: &LossConfig,
) -> Result<GradientField> {
    x_orig.ensure_same_shape(x_adv)?;
    let mut g = misclassification_gradient(model, x_adv, cfg.target_label)?;
    if cfg.lambda_ssim != 0.0 {
        g.add_scaled(&ssim_penalty_gradient(x_orig, x_adv, cfg)?, 1.0)?;
    }
    Ok(g)
}
