use super::loss::{input_gradient, misclassification_gradient, ssim_penalty_gradient, LossConfig};
use super::network::{Classifier, Label};
use crate::error::{invalid, Result};
use crate::imgmath::{DiversityTransform, GradientField, Image};

/// Ordered surrogate models with a probability vector of gradient weights.
#[derive(Debug, Clone)]
pub struct SurrogateEnsemble {
    members: Vec<Classifier>,
    weights: Vec<f64>,
}

fn check_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k {
        return Err(invalid(format!("{} weights for {k} members", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(invalid("ensemble weights must be finite and non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("ensemble weights sum to {sum}, expected 1")));
    }
    Ok(())
}

impl SurrogateEnsemble {
    /// Uniformly weighted ensemble.
    pub fn new(members: Vec<Classifier>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("surrogate ensemble needs at least one member"));
        }
        let k = members.len();
        Ok(Self {
            members,
            weights: vec![1.0 / k as f64; k],
        })
    }

    pub fn with_weights(members: Vec<Classifier>, weights: Vec<f64>) -> Result<Self> {
        let mut e = Self::new(members)?;
        e.set_weights(weights)?;
        Ok(e)
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        check_weights(&weights, self.members.len())?;
        self.weights = weights;
        Ok(())
    }

    pub fn members(&self) -> &[Classifier] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Per-member `predict(x) == Real`.
    pub fn fooled_bits(&self, x: &Image) -> Result<Vec<bool>> {
        self.members
            .iter()
            .map(|m| Ok(m.predict(x)? == Label::Real))
            .collect()
    }
}

/// Weighted sum of member gradients of the total loss at `x_adv`.
pub fn ensemble_gradient(
    ensemble: &SurrogateEnsemble,
    x_orig: &Image,
    x_adv: &Image,
    cfg: &LossConfig,
) -> Result<GradientField> {
    if ensemble.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    let mut acc = GradientField::zeros_like(x_adv);
    for (m, &w) in ensemble.members().iter().zip(ensemble.weights()) {
        acc.add_scaled(&input_gradient(m, x_orig, x_adv, cfg)?, w)?;
    }
    Ok(acc)
}

/// Total-loss gradient at `x_adv` where each member sees `transform(x_adv)`.
///
/// The misclassification part is pulled back through the (linear) transform;
/// the SSIM penalty is model-independent and taken at `x_adv` itself. With no
/// transform this equals [`ensemble_gradient`] up to summation order.
pub fn transformed_ensemble_gradient(
    ensemble: &SurrogateEnsemble,
    x_orig: &Image,
    x_adv: &Image,
    transform: Option<&DiversityTransform>,
    cfg: &LossConfig,
) -> Result<GradientField> {
    if ensemble.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    x_orig.ensure_same_shape(x_adv)?;
    let seen = match transform {
        Some(t) => t.apply(x_adv)?,
        None => x_adv.clone(),
    };
    let mut acc = GradientField::zeros_like(x_adv);
    for (m, &w) in ensemble.members().iter().zip(ensemble.weights()) {
        acc.add_scaled(&misclassification_gradient(m, &seen, cfg.target_label)?, w)?;
    }
    if let Some(t) = transform {
        acc = t.adjoint(&acc)?;
    }
    if cfg.lambda_ssim != 0.0 {
        acc.add_scaled(&ssim_penalty_gradient(x_orig, x_adv, cfg)?, 1.0)?;
    }
    Ok(acc)
}
