use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgmath::DEFAULT_WINDOW;
use crate::models::{Label, LossConfig};

/// Coarse epsilon grid plus the refinement and variance-scaling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonGrid {
    /// Ascending budgets before variance scaling.
    pub base: Vec<f64>,
    /// Pixel variance that maps to a scale of 1.
    pub variance_ref: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub bisection_steps: usize,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        Self {
            base: [2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0]
                .iter()
                .map(|v| v / 255.0)
                .collect(),
            variance_ref: 0.05,
            scale_min: 0.5,
            scale_max: 2.0,
            bisection_steps: 5,
        }
    }
}

impl EpsilonGrid {
    pub fn validate(&self) -> Result<()> {
        if self.base.is_empty() {
            return Err(invalid("epsilon grid is empty"));
        }
        if self.base.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(invalid("epsilon grid values must be finite and non-negative"));
        }
        if self.base.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("epsilon grid must be strictly ascending"));
        }
        if !(self.variance_ref > 0.0) {
            return Err(invalid("variance_ref must be positive"));
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max) {
            return Err(invalid("grid scale bounds must satisfy 0 < min <= max"));
        }
        Ok(())
    }

    /// Multiplier applied to the base grid for an image of the given pixel variance.
    pub fn scale_for_variance(&self, variance: f64) -> f64 {
        (variance / self.variance_ref).clamp(self.scale_min, self.scale_max)
    }
}

/// How often the surrogate weights are recomputed during MNTD-PGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApwSchedule {
    EveryIteration,
    Once,
    /// Keep uniform weights.
    Off,
}

/// When the photometric/noise preprocessing runs relative to the MNTD loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessPlacement {
    Before,
    After,
    Both,
}

/// Which surrogate SG-PGD attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgSurrogate {
    Index(usize),
    /// The surrogate with the largest APW weight at the MNTD-PGD result.
    ApwHeaviest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// Fixed step size; when unset the step is `max(alpha_fraction * epsilon, alpha_min)`.
    pub alpha: Option<f64>,
    pub alpha_fraction: f64,
    pub alpha_min: f64,
    pub iterations: usize,
    pub mu: f64,
    pub ti_kernel_size: usize,
    pub ti_sigma: f64,
    pub di_probability: f64,
    pub di_scale_min: f64,
    pub di_scale_max: f64,
    pub lambda_ssim: f64,
    pub ssim_window: usize,
    /// Fixed budget; when unset MNTD-PGD runs the epsilon search.
    pub epsilon: Option<f64>,
    pub epsilon_grid: EpsilonGrid,
    pub apw_temperature: f64,
    pub apw_schedule: ApwSchedule,
    pub preprocess_placement: PreprocessPlacement,
    pub sg_surrogate: SgSurrogate,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            alpha_fraction: 1.0 / 8.0,
            alpha_min: 1.0 / 255.0,
            iterations: 20,
            mu: 1.0,
            ti_kernel_size: 5,
            ti_sigma: 1.5,
            di_probability: 0.5,
            di_scale_min: 0.8,
            di_scale_max: 1.0,
            lambda_ssim: 0.3,
            ssim_window: DEFAULT_WINDOW,
            epsilon: None,
            epsilon_grid: EpsilonGrid::default(),
            apw_temperature: 0.5,
            apw_schedule: ApwSchedule::EveryIteration,
            preprocess_placement: PreprocessPlacement::Before,
            sg_surrogate: SgSurrogate::ApwHeaviest,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(invalid(format!("alpha must be non-negative, got {a}")));
            }
        }
        if !(self.alpha_fraction > 0.0) || !(self.alpha_min >= 0.0) {
            return Err(invalid("alpha_fraction must be positive and alpha_min non-negative"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if !(self.mu >= 0.0) {
            return Err(invalid("mu must be non-negative"));
        }
        if self.ti_kernel_size.is_multiple_of(2) || !(self.ti_sigma > 0.0) {
            return Err(invalid("TI kernel size must be odd and sigma positive"));
        }
        if !(0.0..=1.0).contains(&self.di_probability) {
            return Err(invalid("di_probability must lie in [0, 1]"));
        }
        crate::imgmath::validate_scales(self.di_scale_min, self.di_scale_max)?;
        if let Some(e) = self.epsilon {
            if !(e >= 0.0) {
                return Err(invalid(format!("epsilon must be non-negative, got {e}")));
            }
        }
        if !(self.apw_temperature > 0.0) {
            return Err(invalid("apw_temperature must be positive"));
        }
        self.loss_config().validate()?;
        self.epsilon_grid.validate()
    }

    pub fn step_size(&self, epsilon: f64) -> f64 {
        self.alpha
            .unwrap_or_else(|| (self.alpha_fraction * epsilon).max(self.alpha_min))
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda_ssim: self.lambda_ssim,
            target_label: Label::Real,
            ssim_window: self.ssim_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub contrast: f64,
    pub brightness: f64,
    pub perlin_grid_cells: usize,
    pub perlin_amplitude: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            contrast: 0.9,
            brightness: 0.0,
            perlin_grid_cells: 8,
            perlin_amplitude: 2.0 / 255.0,
        }
    }
}

impl PreprocessConfig {
    pub fn identity() -> Self {
        Self {
            contrast: 1.0,
            brightness: 0.0,
            perlin_grid_cells: 1,
            perlin_amplitude: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contrast > 0.0) {
            return Err(invalid("contrast must be positive"));
        }
        if !(self.perlin_amplitude >= 0.0) {
            return Err(invalid("perlin_amplitude must be non-negative"));
        }
        if self.perlin_grid_cells == 0 {
            return Err(invalid("perlin_grid_cells must be at least 1"));
        }
        Ok(())
    }
}
