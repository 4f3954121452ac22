//! Procedural stand-in corpus.
//!
//! Real images are smooth color fields (under one cycle per image). Fake images
//! are drawn from the same distribution and then carry a faint tinted periodic
//! artifact: a block checkerboard, concentric rings or diagonal stripes with a
//! 5-8 pixel period. That is the highest frequency band the small classifiers
//! resolve reliably and still survives the attack's gradient smoothing.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgmath::{Image, CHANNELS};
use crate::models::{Label, LabeledImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_real: usize,
    pub n_fake: usize,
    /// Fake images generated separately as attack inputs.
    pub n_inputs: usize,
    pub size: usize,
    pub artifact_amplitude: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_real: 100,
            n_fake: 100,
            n_inputs: 20,
            size: 24,
            artifact_amplitude: 0.15,
        }
    }
}

struct Wave {
    amp: f64,
    fy: f64,
    fx: f64,
    phase: f64,
}

fn smooth_field<R: Rng>(rng: &mut R, size: usize) -> Vec<f64> {
    let mut data = vec![0.0; size * size * CHANNELS];
    for ch in 0..CHANNELS {
        let base = rng.gen_range(0.25..0.75);
        let waves: Vec<Wave> = (0..3)
            .map(|_| Wave {
                amp: rng.gen_range(0.0..0.08),
                fy: rng.gen_range(0.0..1.0),
                fx: rng.gen_range(0.0..1.0),
                phase: rng.gen_range(0.0..TAU),
            })
            .collect();
        for r in 0..size {
            for c in 0..size {
                let (u, v) = (c as f64 / size as f64, r as f64 / size as f64);
                let mut val = base;
                for w in &waves {
                    val += w.amp * (TAU * (w.fx * u + w.fy * v) + w.phase).cos();
                }
                data[(r * size + c) * CHANNELS + ch] = val;
            }
        }
    }
    data
}

fn add_artifact<R: Rng>(rng: &mut R, data: &mut [f64], size: usize, amplitude: f64) {
    let kind = rng.gen_range(0..3u8);
    let amp = amplitude * rng.gen_range(0.7..1.0);
    let tint: [f64; CHANNELS] = [
        rng.gen_range(0.6..1.0),
        rng.gen_range(0.6..1.0),
        rng.gen_range(0.6..1.0),
    ];
    let period = rng.gen_range(5.0..8.0);
    let block = rng.gen_range(3..5usize);
    let (cy, cx) = (rng.gen_range(0.0..size as f64), rng.gen_range(0.0..size as f64));
    let phase = rng.gen_range(0.0..TAU);
    for r in 0..size {
        for c in 0..size {
            let pattern = match kind {
                0 => {
                    if (r / block + c / block) % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                1 => {
                    let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
                    (TAU * d / period + phase).sin()
                }
                _ => (TAU * (r + c) as f64 / period + phase).sin(),
            };
            for (ch, t) in tint.iter().enumerate() {
                data[(r * size + c) * CHANNELS + ch] += amp * t * pattern;
            }
        }
    }
}

fn finish(size: usize, data: Vec<f64>) -> Image {
    let clamped = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Image::new(size, size, clamped).expect("clamped pixels")
}

fn validate(size: usize) -> Result<()> {
    if size < 16 {
        return Err(invalid(format!("synthetic images must be at least 16 pixels, got {size}")));
    }
    Ok(())
}

pub fn generate_real<R: Rng>(rng: &mut R, size: usize) -> Image {
    finish(size, smooth_field(rng, size))
}

pub fn generate_fake<R: Rng>(rng: &mut R, size: usize, artifact_amplitude: f64) -> Image {
    let mut data = smooth_field(rng, size);
    add_artifact(rng, &mut data, size, artifact_amplitude);
    finish(size, data)
}

/// `n_real` real images followed by `n_fake` fakes, deterministic in `seed`.
pub fn synthesize_corpus(
    n_real: usize,
    n_fake: usize,
    size: usize,
    artifact_amplitude: f64,
    seed: u64,
) -> Result<Vec<LabeledImage>> {
    if n_real == 0 || n_fake == 0 {
        return Err(invalid("corpus needs at least one real and one fake image"));
    }
    validate(size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_real + n_fake);
    for _ in 0..n_real {
        out.push(LabeledImage {
            image: generate_real(&mut rng, size),
            label: Label::Real,
        });
    }
    for _ in 0..n_fake {
        out.push(LabeledImage {
            image: generate_fake(&mut rng, size, artifact_amplitude),
            label: Label::Fake,
        });
    }
    Ok(out)
}

/// Fake images only, for use as attack inputs.
pub fn synthesize_fakes(n: usize, size: usize, artifact_amplitude: f64, seed: u64) -> Result<Vec<Image>> {
    validate(size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| generate_fake(&mut rng, size, artifact_amplitude))
        .collect())
}
