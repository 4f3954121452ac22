//! Ensemble PGD with momentum, look-ahead, translation-invariant smoothing
//! and input diversity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::apw::apw_update;
use super::candidate::{AdversarialCandidate, Stream};
use super::config::{ApwSchedule, AttackConfig, PreprocessConfig, PreprocessPlacement};
use super::preprocess::preprocess;
use crate::error::Result;
use crate::imgmath::{
    convolve_same, gaussian_kernel, project_linf, DiversityTransform, GradientField, Image,
};
use crate::models::{transformed_ensemble_gradient, SurrogateEnsemble};

/// Accumulated (ascent) gradient direction and iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub g: GradientField,
    pub t: usize,
}

impl MomentumState {
    pub fn new(x: &Image) -> Self {
        Self {
            g: GradientField::zeros_like(x),
            t: 0,
        }
    }
}

#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `project(x_orig, x + scale * sign(-g), epsilon)`.
fn signed_descent(x_orig: &Image, x: &Image, g: &GradientField, scale: f64, epsilon: f64) -> Result<Image> {
    let step = g.map(|v| scale * sign(-v));
    project_linf(x_orig, &x.add_clamped(&step)?, epsilon)
}

/// One MNTD-PGD iteration using the ensemble's current weights.
///
/// Order: look-ahead along the momentum direction, random resize-and-pad,
/// weighted ensemble gradient of the total loss, Gaussian smoothing, L1
/// normalization and momentum accumulation, then a signed descent step
/// projected back into the budget.
#[allow(clippy::too_many_arguments)]
pub fn mntd_step<R: Rng + ?Sized>(
    x_orig: &Image,
    x_adv: &Image,
    state: &MomentumState,
    ensemble: &SurrogateEnsemble,
    cfg: &AttackConfig,
    epsilon: f64,
    rng: &mut R,
) -> Result<(Image, MomentumState)> {
    x_orig.ensure_same_shape(x_adv)?;
    let alpha = cfg.step_size(epsilon);
    let lookahead = signed_descent(x_orig, x_adv, &state.g, alpha * cfg.mu, epsilon)?;
    let transform = DiversityTransform::sample(
        x_adv.height(),
        x_adv.width(),
        cfg.di_probability,
        cfg.di_scale_min,
        cfg.di_scale_max,
        rng,
    )?;
    let grad = transformed_ensemble_gradient(
        ensemble,
        x_orig,
        &lookahead,
        transform.as_ref(),
        &cfg.loss_config(),
    )?;
    let kernel = gaussian_kernel(cfg.ti_kernel_size, cfg.ti_sigma)?;
    let mut smoothed = convolve_same(&grad, &kernel)?;
    let l1 = smoothed.l1_norm();
    if l1 > 0.0 {
        smoothed = smoothed.map(|v| v / l1);
    }
    let mut g = state.g.map(|v| cfg.mu * v);
    g.add_scaled(&smoothed, 1.0)?;
    let next = signed_descent(x_orig, x_adv, &g, alpha, epsilon)?;
    Ok((next, MomentumState { g, t: state.t + 1 }))
}

/// Full MNTD-PGD run at a fixed budget. `on_iterate` sees every intermediate image.
pub fn mntd_pgd_attack_observed(
    x: &Image,
    ensemble: &SurrogateEnsemble,
    cfg: &AttackConfig,
    epsilon: f64,
    pre_cfg: &PreprocessConfig,
    on_iterate: &mut dyn FnMut(&Image),
) -> Result<AdversarialCandidate> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ens = ensemble.clone();
    let mut x_adv = match cfg.preprocess_placement {
        PreprocessPlacement::Before | PreprocessPlacement::Both => {
            project_linf(x, &preprocess(x, pre_cfg, &mut rng)?, epsilon)?
        }
        PreprocessPlacement::After => x.clone(),
    };
    on_iterate(&x_adv);
    if cfg.apw_schedule == ApwSchedule::Once {
        ens.set_weights(apw_update(&ens, &x_adv, cfg.apw_temperature)?)?;
    }
    let mut state = MomentumState::new(x);
    for _ in 0..cfg.iterations {
        if cfg.apw_schedule == ApwSchedule::EveryIteration {
            ens.set_weights(apw_update(&ens, &x_adv, cfg.apw_temperature)?)?;
        }
        let (next, s) = mntd_step(x, &x_adv, &state, &ens, cfg, epsilon, &mut rng)?;
        x_adv = next;
        state = s;
        on_iterate(&x_adv);
    }
    if matches!(
        cfg.preprocess_placement,
        PreprocessPlacement::After | PreprocessPlacement::Both
    ) {
        x_adv = project_linf(x, &preprocess(&x_adv, pre_cfg, &mut rng)?, epsilon)?;
        on_iterate(&x_adv);
    }
    let fooled = ensemble.fooled_bits(&x_adv)?;
    AdversarialCandidate::build(x, x_adv, epsilon, Stream::MntdPgd, cfg.ssim_window, fooled)
}

pub fn mntd_pgd_attack(
    x: &Image,
    ensemble: &SurrogateEnsemble,
    cfg: &AttackConfig,
    epsilon: f64,
    pre_cfg: &PreprocessConfig,
) -> Result<AdversarialCandidate> {
    mntd_pgd_attack_observed(x, ensemble, cfg, epsilon, pre_cfg, &mut |_| {})
}
