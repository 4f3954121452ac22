//! Random resize-and-pad input transform.

use rand::Rng;

use super::image::{GradientField, Image, CHANNELS};
use crate::error::{invalid, shape, Result};

/// One sampled instance of the resize-and-pad transform.
///
/// The image is bilinearly resized (half-pixel centers) to `inner_h x inner_w`
/// and placed at (`off_y`, `off_x`) on a zero canvas of the original size. The
/// map is linear in pixel values, so gradients flow back through [`adjoint`].
///
/// [`adjoint`]: DiversityTransform::adjoint
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityTransform {
    pub height: usize,
    pub width: usize,
    pub inner_h: usize,
    pub inner_w: usize,
    pub off_y: usize,
    pub off_x: usize,
}

/// Source taps (index, weight) along one axis for a bilinear resize.
fn axis_taps(src: usize, dst: usize) -> Vec<[(usize, f64); 2]> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            let t = pos - lo as f64;
            [(lo, 1.0 - t), (hi, t)]
        })
        .collect()
}

pub(crate) fn validate_scales(scale_min: f64, scale_max: f64) -> Result<()> {
    if !(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0) {
        return Err(invalid(format!(
            "diversity scales must satisfy 0 < min <= max <= 1, got [{scale_min}, {scale_max}]"
        )));
    }
    Ok(())
}

impl DiversityTransform {
    /// Draws a transform. Returns `None` when the draw leaves the image unchanged.
    ///
    /// Always consumes the same number of random values for a given outcome of
    /// the probability draw.
    pub fn sample<R: Rng + ?Sized>(
        height: usize,
        width: usize,
        probability: f64,
        scale_min: f64,
        scale_max: f64,
        rng: &mut R,
    ) -> Result<Option<Self>> {
        validate_scales(scale_min, scale_max)?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(invalid(format!("diversity probability {probability} outside [0, 1]")));
        }
        if rng.gen::<f64>() >= probability {
            return Ok(None);
        }
        let scale = scale_min + (scale_max - scale_min) * rng.gen::<f64>();
        let inner_h = ((height as f64 * scale).round() as usize).clamp(1, height);
        let inner_w = ((width as f64 * scale).round() as usize).clamp(1, width);
        let off_y = rng.gen_range(0..=height - inner_h);
        let off_x = rng.gen_range(0..=width - inner_w);
        if inner_h == height && inner_w == width {
            return Ok(None);
        }
        Ok(Some(Self {
            height,
            width,
            inner_h,
            inner_w,
            off_y,
            off_x,
        }))
    }

    pub fn apply(&self, x: &Image) -> Result<Image> {
        if x.height() != self.height || x.width() != self.width {
            return Err(shape("image does not match diversity transform"));
        }
        let rows = axis_taps(self.height, self.inner_h);
        let cols = axis_taps(self.width, self.inner_w);
        let mut out = vec![0.0; x.len()];
        for (dy, rt) in rows.iter().enumerate() {
            for (dx, ct) in cols.iter().enumerate() {
                let o = ((dy + self.off_y) * self.width + dx + self.off_x) * CHANNELS;
                for &(sr, wr) in rt {
                    for &(sc, wc) in ct {
                        let wgt = wr * wc;
                        for ch in 0..CHANNELS {
                            out[o + ch] += wgt * x.get(sr, sc, ch);
                        }
                    }
                }
            }
        }
        // Bilinear weights are a convex combination, so values stay in [0, 1] up to rounding.
        out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Ok(Image::from_valid(self.height, self.width, out))
    }

    /// Transpose of [`apply`](Self::apply) acting on a gradient with respect to the output.
    pub fn adjoint(&self, g: &GradientField) -> Result<GradientField> {
        if g.height() != self.height || g.width() != self.width {
            return Err(shape("gradient does not match diversity transform"));
        }
        let rows = axis_taps(self.height, self.inner_h);
        let cols = axis_taps(self.width, self.inner_w);
        let mut out = vec![0.0; g.as_slice().len()];
        for (dy, rt) in rows.iter().enumerate() {
            for (dx, ct) in cols.iter().enumerate() {
                for &(sr, wr) in rt {
                    for &(sc, wc) in ct {
                        let wgt = wr * wc;
                        let s = (sr * self.width + sc) * CHANNELS;
                        for ch in 0..CHANNELS {
                            out[s + ch] += wgt * g.get(dy + self.off_y, dx + self.off_x, ch);
                        }
                    }
                }
            }
        }
        Ok(GradientField::from_parts(self.height, self.width, out))
    }
}

/// With probability `probability`, shrinks `x` by a random factor in
/// `[scale_min, scale_max]` and zero-pads it back to full size at a random offset.
pub fn input_diversity<R: Rng + ?Sized>(
    x: &Image,
    probability: f64,
    scale_min: f64,
    scale_max: f64,
    rng: &mut R,
) -> Result<Image> {
    match DiversityTransform::sample(x.height(), x.width(), probability, scale_min, scale_max, rng)? {
        Some(t) => t.apply(x),
        None => Ok(x.clone()),
    }
}


/// Pinned outputs: any change to the sampling order or the resampler shows up here.
#[cfg(test)]
mod golden {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fnv(bits: impl Iterator<Item = u64>) -> u64 {
        bits.fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b).wrapping_mul(0x100_0000_01b3))
    }

    fn tr(inner: usize, off_y: usize, off_x: usize) -> Option<DiversityTransform> {
        Some(DiversityTransform {
            height: 16,
            width: 16,
            inner_h: inner,
            inner_w: inner,
            off_y,
            off_x,
        })
    }

    #[test]
    fn seeded_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let got: Vec<_> = (0..3)
            .map(|_| DiversityTransform::sample(16, 16, 1.0, 0.6, 0.95, &mut rng).unwrap())
            .collect();
        assert_eq!(got, vec![tr(15, 1, 1), tr(10, 2, 3), tr(15, 1, 1)]);
    }

    #[test]
    fn seeded_output_checksum() {
        let x = Image::from_fn(16, 16, |r, c, ch| ((r * 7 + c * 3 + ch * 5) % 17) as f64 / 16.0).unwrap();
        let y = input_diversity(&x, 1.0, 0.6, 0.95, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
        assert_eq!(fnv(y.as_slice().iter().map(|v| v.to_bits())), 0xd5e4_83da_c9c8_6abc);
    }
}
