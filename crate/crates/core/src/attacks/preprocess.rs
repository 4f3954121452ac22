use rand::Rng;

use super::config::PreprocessConfig;
use crate::error::Result;
use crate::imgmath::{adjust_photometric, perlin_noise, Image};

/// Contrast/brightness adjustment followed by additive Perlin noise, clamped to [0, 1].
pub fn preprocess<R: Rng + ?Sized>(x: &Image, cfg: &PreprocessConfig, rng: &mut R) -> Result<Image> {
    cfg.validate()?;
    let adjusted = adjust_photometric(x, cfg.contrast, cfg.brightness)?;
    let noise = perlin_noise(
        x.height(),
        x.width(),
        cfg.perlin_grid_cells,
        cfg.perlin_amplitude,
        rng,
    )?;
    adjusted.add_clamped(&noise)
}
