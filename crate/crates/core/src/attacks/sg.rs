//! Saliency-masked PGD on a single surrogate.

use super::candidate::{AdversarialCandidate, Stream};
use super::config::AttackConfig;
use super::mntd::sign;
use crate::error::Result;
use crate::imgmath::{project_linf, Image};
use crate::models::{misclassification_gradient, saliency_map, Classifier, Label, SaliencyMask};

/// SG-PGD at a fixed budget. The mask is computed once from `x`; every
/// step is `alpha * sign(-grad) * mask`, projected.
pub fn sg_pgd_attack_observed(
    x: &Image,
    model: &Classifier,
    cfg: &AttackConfig,
    epsilon: f64,
    on_iterate: &mut dyn FnMut(&Image),
) -> Result<AdversarialCandidate> {
    let mask = saliency_map(model, x, Label::Real)?;
    masked_pgd(x, model, cfg, epsilon, &mask, on_iterate)
}

/// Targeted PGD whose signed steps are scaled elementwise by `mask`.
pub fn masked_pgd(
    x: &Image,
    model: &Classifier,
    cfg: &AttackConfig,
    epsilon: f64,
    mask: &SaliencyMask,
    on_iterate: &mut dyn FnMut(&Image),
) -> Result<AdversarialCandidate> {
    cfg.validate()?;
    if !mask.values().matches(x) {
        return Err(crate::error::shape("saliency mask does not match image"));
    }
    let alpha = cfg.step_size(epsilon);
    let mut x_adv = x.clone();
    on_iterate(&x_adv);
    for _ in 0..cfg.iterations {
        let g = misclassification_gradient(model, &x_adv, Label::Real)?;
        let mut step = g.clone();
        for (s, (gv, mv)) in step
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice().iter().zip(mask.as_slice()))
        {
            *s = alpha * sign(-gv) * mv;
        }
        x_adv = project_linf(x, &x_adv.add_clamped(&step)?, epsilon)?;
        on_iterate(&x_adv);
    }
    let fooled = vec![model.predict(&x_adv)? == Label::Real];
    AdversarialCandidate::build(x, x_adv, epsilon, Stream::SgPgd, cfg.ssim_window, fooled)
}

pub fn sg_pgd_attack(
    x: &Image,
    model: &Classifier,
    cfg: &AttackConfig,
    epsilon: f64,
) -> Result<AdversarialCandidate> {
    sg_pgd_attack_observed(x, model, cfg, epsilon, &mut |_| {})
}
