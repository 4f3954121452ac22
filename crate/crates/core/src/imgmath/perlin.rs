//! Classic gradient-lattice noise.

use std::f64::consts::{SQRT_2, TAU};

use rand::Rng;

use super::image::{GradientField, CHANNELS};
use crate::error::{invalid, Result};

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Gradient noise over a `grid_cells x grid_cells` lattice spanning the image,
/// scaled to `[-amplitude, amplitude]` and replicated across channels.
///
/// Lattice points fall on pixel `(r, c)` where `r * grid_cells / height` and
/// `c * grid_cells / width` are integers; the noise is zero there.
pub fn perlin_noise<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    grid_cells: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<GradientField> {
    if height == 0 || width == 0 {
        return Err(invalid(format!("noise dimensions must be positive, got {height}x{width}")));
    }
    if grid_cells == 0 {
        return Err(invalid("perlin grid must have at least one cell"));
    }
    if !(amplitude >= 0.0) {
        return Err(invalid(format!("perlin amplitude must be non-negative, got {amplitude}")));
    }
    let side = grid_cells + 1;
    let gradients: Vec<(f64, f64)> = (0..side * side)
        .map(|_| {
            let theta = rng.gen::<f64>() * TAU;
            (theta.cos(), theta.sin())
        })
        .collect();
    let grad = |i: usize, j: usize| gradients[i * side + j];

    let mut data = Vec::with_capacity(height * width * CHANNELS);
    for r in 0..height {
        let v = r as f64 * grid_cells as f64 / height as f64;
        let gy = (v.floor() as usize).min(grid_cells - 1);
        let fy = v - gy as f64;
        for c in 0..width {
            let u = c as f64 * grid_cells as f64 / width as f64;
            let gx = (u.floor() as usize).min(grid_cells - 1);
            let fx = u - gx as f64;
            let dot = |i: usize, j: usize, dx: f64, dy: f64| {
                let (gxv, gyv) = grad(i, j);
                gxv * dx + gyv * dy
            };
            let n00 = dot(gy, gx, fx, fy);
            let n01 = dot(gy, gx + 1, fx - 1.0, fy);
            let n10 = dot(gy + 1, gx, fx, fy - 1.0);
            let n11 = dot(gy + 1, gx + 1, fx - 1.0, fy - 1.0);
            let (sx, sy) = (fade(fx), fade(fy));
            // Unit gradients bound the raw value by sqrt(1/2).
            let n = (lerp(lerp(n00, n01, sx), lerp(n10, n11, sx), sy) * SQRT_2).clamp(-1.0, 1.0);
            let value = amplitude * n;
            data.extend_from_slice(&[value; CHANNELS]);
        }
    }
    Ok(GradientField::from_parts(height, width, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_amplitude_is_zero() {
        let f = perlin_noise(12, 12, 3, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(f.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vanishes_on_lattice_pixels() {
        let f = perlin_noise(16, 16, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for r in (0..16).step_by(4) {
            for c in (0..16).step_by(4) {
                assert_eq!(f.get(r, c, 0), 0.0);
            }
        }
    }

    #[test]
    fn bounded_by_amplitude() {
        for seed in 0..10 {
            let amp = 0.3;
            let f = perlin_noise(16, 16, 4, amp, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(f.max_abs() <= amp);
            assert!(f.max_abs() > 0.0);
        }
    }

    #[test]
    fn channels_replicated_and_deterministic() {
        let a = perlin_noise(10, 7, 2, 0.5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = perlin_noise(10, 7, 2, 0.5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        for r in 0..10 {
            for c in 0..7 {
                assert_eq!(a.get(r, c, 0), a.get(r, c, 2));
            }
        }
    }

    #[test]
    fn invalid_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(perlin_noise(0, 4, 2, 1.0, &mut rng).is_err());
        assert!(perlin_noise(4, 4, 0, 1.0, &mut rng).is_err());
        assert!(perlin_noise(4, 4, 2, -1.0, &mut rng).is_err());
    }
}
