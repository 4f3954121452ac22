//! Windowed structural similarity on unit-interval RGB images.
//!
//! Local statistics are taken over every fully contained `window x window`
//! square with uniform weights and sample (N-1) normalization of the
//! variances and covariance. The per-window index is averaged over window
//! positions, then over the three channels.

use super::image::{GradientField, Image, CHANNELS};
use crate::error::{invalid, Result};

pub const DEFAULT_WINDOW: usize = 7;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
/// Dynamic range of unit-interval pixels.
pub const DATA_RANGE: f64 = 1.0;
pub const C1: f64 = (K1 * DATA_RANGE) * (K1 * DATA_RANGE);
pub const C2: f64 = (K2 * DATA_RANGE) * (K2 * DATA_RANGE);

fn validate(a: &Image, b: &Image, window: usize) -> Result<()> {
    a.ensure_same_shape(b)?;
    if window.is_multiple_of(2) {
        return Err(invalid(format!("SSIM window must be odd, got {window}")));
    }
    if window > a.height().min(a.width()) {
        return Err(invalid(format!(
            "SSIM window {window} exceeds image size {}x{}",
            a.height(),
            a.width()
        )));
    }
    Ok(())
}

/// Local statistics of one window: means, sample variances and covariance.
///
/// Computed in two passes (means, then centered moments) so that flat windows
/// give exactly zero variance.
struct LocalStats {
    mx: f64,
    my: f64,
    vx: f64,
    vy: f64,
    cxy: f64,
}

impl LocalStats {
    #[allow(clippy::too_many_arguments)]
    fn compute(a: &[f64], b: &[f64], width: usize, r0: usize, c0: usize, ch: usize, win: usize) -> Self {
        let n = (win * win) as f64;
        let idx = |r: usize, c: usize| (r * width + c) * CHANNELS + ch;
        let (mut sx, mut sy) = (0.0, 0.0);
        for r in r0..r0 + win {
            for c in c0..c0 + win {
                sx += a[idx(r, c)];
                sy += b[idx(r, c)];
            }
        }
        let (mx, my) = (sx / n, sy / n);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for r in r0..r0 + win {
            for c in c0..c0 + win {
                let dx = a[idx(r, c)] - mx;
                let dy = b[idx(r, c)] - my;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
        }
        let denom = n - 1.0;
        Self {
            mx,
            my,
            vx: sxx / denom,
            vy: syy / denom,
            cxy: sxy / denom,
        }
    }

    fn terms(&self) -> (f64, f64, f64, f64) {
        let a1 = 2.0 * self.mx * self.my + C1;
        let b1 = 2.0 * self.cxy + C2;
        let a2 = self.mx * self.mx + self.my * self.my + C1;
        let b2 = self.vx + self.vy + C2;
        (a1, b1, a2, b2)
    }
}

/// Mean SSIM between `a` and `b`. `ssim(a, a, w)` is exactly 1.
pub fn ssim(a: &Image, b: &Image, window: usize) -> Result<f64> {
    validate(a, b, window)?;
    if a.as_slice() == b.as_slice() {
        return Ok(1.0);
    }
    let (h, w) = (a.height(), a.width());
    let (xa, xb) = (a.as_slice(), b.as_slice());
    let positions = ((h - window + 1) * (w - window + 1)) as f64;
    let mut total = 0.0;
    for ch in 0..CHANNELS {
        let mut channel_sum = 0.0;
        for r0 in 0..=h - window {
            for c0 in 0..=w - window {
                let st = LocalStats::compute(xa, xb, w, r0, c0, ch, window);
                let (a1, b1, a2, b2) = st.terms();
                channel_sum += (a1 * b1) / (a2 * b2);
            }
        }
        total += channel_sum / positions;
    }
    Ok(total / CHANNELS as f64)
}

/// SSIM together with its gradient with respect to the second image.
pub fn ssim_with_grad(a: &Image, b: &Image, window: usize) -> Result<(f64, GradientField)> {
    validate(a, b, window)?;
    let (h, w) = (a.height(), a.width());
    let n = (window * window) as f64;
    let cov_norm = n / (n - 1.0);
    let (xa, xb) = (a.as_slice(), b.as_slice());
    let positions = ((h - window + 1) * (w - window + 1)) as f64;
    let norm = 1.0 / (positions * CHANNELS as f64);
    let mut grad = vec![0.0; xa.len()];
    let mut total = 0.0;
    for ch in 0..CHANNELS {
        for r0 in 0..=h - window {
            for c0 in 0..=w - window {
                let st = LocalStats::compute(xa, xb, w, r0, c0, ch, window);
                let (a1, b1, a2, b2) = st.terms();
                let den = a2 * b2;
                let s = a1 * b1 / den;
                total += s;
                // dS/dy_j = scale * (k0 + k1 * x_j + k2 * y_j) for every pixel j in the window.
                let scale = 2.0 / (n * den) * norm;
                let k0 = st.mx * b1 - a1 * cov_norm * st.mx - s * st.my * b2
                    + s * a2 * cov_norm * st.my;
                let k1 = a1 * cov_norm;
                let k2 = -s * a2 * cov_norm;
                for r in r0..r0 + window {
                    for c in c0..c0 + window {
                        let i = (r * w + c) * CHANNELS + ch;
                        grad[i] += scale * (k0 + k1 * xa[i] + k2 * xb[i]);
                    }
                }
            }
        }
    }
    let value = if xa == xb { 1.0 } else { total * norm };
    Ok((value, GradientField::from_parts(h, w, grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |_, _, _| rng.gen::<f64>()).unwrap()
    }

    #[test]
    fn identical_images_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_image(&mut rng, 12, 9);
        assert_eq!(ssim(&x, &x, 7).unwrap(), 1.0);
    }

    #[test]
    fn constant_images_match_closed_form() {
        let a = Image::filled(10, 10, 0.5).unwrap();
        let b = Image::filled(10, 10, 0.6).unwrap();
        // Zero variance and covariance: the contrast-structure factor is C2 / C2.
        let expected = (2.0 * 0.5 * 0.6 + C1) / (0.25 + 0.36 + C1);
        for win in [3usize, 7, 9] {
            let got = ssim(&a, &b, win).unwrap();
            assert!((got - expected).abs() < 1e-12, "window {win}: {got} vs {expected}");
        }
    }

    #[test]
    fn rejects_even_and_oversized_windows() {
        let a = Image::filled(8, 8, 0.2).unwrap();
        assert!(ssim(&a, &a, 4).is_err());
        assert!(ssim(&a, &a, 9).is_err());
        let b = Image::filled(8, 9, 0.2).unwrap();
        assert!(ssim(&a, &b, 3).is_err());
    }

    #[test]
    fn gradient_value_agrees_with_plain_ssim() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_image(&mut rng, 11, 10);
        let b = random_image(&mut rng, 11, 10);
        let (v, _) = ssim_with_grad(&a, &b, 7).unwrap();
        assert!((v - ssim(&a, &b, 7).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_image(&mut rng, 9, 8);
        let b = random_image(&mut rng, 9, 8);
        let (_, g) = ssim_with_grad(&a, &b, 5).unwrap();
        let h = 1e-5;
        let base = b.as_slice().to_vec();
        for i in (0..base.len()).step_by(7) {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i] += h;
            minus[i] -= h;
            let fp = ssim(&a, &Image::new(9, 8, plus).unwrap(), 5).unwrap();
            let fm = ssim(&a, &Image::new(9, 8, minus).unwrap(), 5).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g.as_slice()[i]).abs() < 1e-7, "coord {i}: {fd} vs {}", g.as_slice()[i]);
        }
    }

    #[test]
    fn gradient_vanishes_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_image(&mut rng, 10, 10);
        let (v, g) = ssim_with_grad(&a, &a, 7).unwrap();
        assert_eq!(v, 1.0);
        assert!(g.max_abs() < 1e-9);
    }
}
