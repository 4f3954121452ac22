use super::image::{GradientField, CHANNELS};
use crate::error::{invalid, Result};

/// Normalized, odd-sized square Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(invalid(format!("kernel size must be odd and positive, got {size}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("kernel sigma must be positive, got {sigma}")));
        }
        let c = (size - 1) as f64 / 2.0;
        let mut weights = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let (di, dj) = (i as f64 - c, j as f64 - c);
                weights.push((-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp());
            }
        }
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= z);
        Ok(Self {
            size,
            sigma,
            weights,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }
}

pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<GaussianKernel> {
    GaussianKernel::new(size, sigma)
}

/// Channel-wise 2-D filtering with zero padding; the output has the input's shape.
pub fn convolve_same(field: &GradientField, kernel: &GaussianKernel) -> Result<GradientField> {
    let (h, w, k) = (field.height(), field.width(), kernel.size());
    if k > h || k > w {
        return Err(invalid(format!("kernel of size {k} larger than {h}x{w} field")));
    }
    if k == 1 {
        let w0 = kernel.weight(0, 0);
        return Ok(field.map(|v| v * w0));
    }
    let half = (k / 2) as isize;
    let src = field.as_slice();
    let mut out = vec![0.0; src.len()];
    for r in 0..h {
        for c in 0..w {
            let mut acc = [0.0; CHANNELS];
            for i in 0..k {
                let rr = r as isize + i as isize - half;
                if rr < 0 || rr >= h as isize {
                    continue;
                }
                for j in 0..k {
                    let cc = c as isize + j as isize - half;
                    if cc < 0 || cc >= w as isize {
                        continue;
                    }
                    let kw = kernel.weight(i, j);
                    let base = (rr as usize * w + cc as usize) * CHANNELS;
                    for (ch, a) in acc.iter_mut().enumerate() {
                        *a += kw * src[base + ch];
                    }
                }
            }
            out[(r * w + c) * CHANNELS..(r * w + c + 1) * CHANNELS].copy_from_slice(&acc);
        }
    }
    Ok(GradientField::from_parts(h, w, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn size_one_is_unit() {
        let k = gaussian_kernel(1, 0.3).unwrap();
        assert_eq!(k.weights(), &[1.0]);
    }

    #[test]
    fn even_size_and_bad_sigma_rejected() {
        assert!(gaussian_kernel(4, 1.0).is_err());
        assert!(gaussian_kernel(0, 1.0).is_err());
        assert!(gaussian_kernel(3, 0.0).is_err());
    }

    #[test]
    fn size_three_center_is_max() {
        let k = gaussian_kernel(3, 0.8).unwrap();
        let sum: f64 = k.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let center = k.weight(1, 1);
        assert!(k.weights().iter().all(|&w| w <= center));
    }

    #[test]
    fn size_five_center_matches_brute_force() {
        let mut z = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let (di, dj) = (i as f64 - 2.0, j as f64 - 2.0);
                z += (-(di * di + dj * dj) / 2.0).exp();
            }
        }
        let k = gaussian_kernel(5, 1.0).unwrap();
        assert!((k.weight(2, 2) - 1.0 / z).abs() < 1e-15);
    }

    #[test]
    fn weights_are_normalized_and_symmetric() {
        for size in [1usize, 3, 5, 7, 9] {
            for sigma in [0.5, 1.0, 2.0] {
                let k = gaussian_kernel(size, sigma).unwrap();
                let sum: f64 = k.weights().iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                for i in 0..size {
                    for j in 0..size {
                        let w = k.weight(i, j);
                        assert!((w - k.weight(size - 1 - i, j)).abs() < 1e-15);
                        assert!((w - k.weight(i, size - 1 - j)).abs() < 1e-15);
                        assert!((w - k.weight(j, i)).abs() < 1e-15);
                    }
                }
            }
        }
    }

    fn brute_convolve(f: &GradientField, k: &GaussianKernel) -> Vec<f64> {
        let (h, w, n) = (f.height() as isize, f.width() as isize, k.size() as isize);
        let mut out = vec![0.0; f.as_slice().len()];
        for r in 0..h {
            for c in 0..w {
                for ch in 0..CHANNELS {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let (rr, cc) = (r + i - n / 2, c + j - n / 2);
                            if rr >= 0 && rr < h && cc >= 0 && cc < w {
                                acc += k.weight(i as usize, j as usize)
                                    * f.get(rr as usize, cc as usize, ch);
                            }
                        }
                    }
                    out[((r * w + c) as usize) * CHANNELS + ch] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (size, sigma) in [(3usize, 1.0), (5, 1.5), (7, 0.7)] {
            let data: Vec<f64> = (0..8 * 8 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = GradientField::new(8, 8, data).unwrap();
            let k = gaussian_kernel(size, sigma).unwrap();
            let got = convolve_same(&f, &k).unwrap();
            for (a, b) in got.as_slice().iter().zip(brute_convolve(&f, &k)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_kernel_and_constant_interior() {
        let f = GradientField::new(6, 6, (0..108).map(|v| v as f64).collect()).unwrap();
        let id = gaussian_kernel(1, 1.0).unwrap();
        assert_eq!(convolve_same(&f, &id).unwrap(), f);

        let c = GradientField::new(9, 9, vec![2.5; 243]).unwrap();
        let k = gaussian_kernel(3, 1.0).unwrap();
        let out = convolve_same(&c, &k).unwrap();
        for r in 1..8 {
            for col in 1..8 {
                assert!((out.get(r, col, 1) - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oversized_kernel_rejected() {
        let f = GradientField::zeros(4, 6);
        assert!(convolve_same(&f, &gaussian_kernel(5, 1.0).unwrap()).is_err());
    }
}
