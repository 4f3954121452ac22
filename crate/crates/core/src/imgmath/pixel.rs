use super::image::Image;
use crate::error::{invalid, Result};

/// Maps each pixel to `clamp(contrast * (p - 0.5) + 0.5 + brightness, 0, 1)`.
pub fn adjust_photometric(x: &Image, contrast: f64, brightness: f64) -> Result<Image> {
    if !(contrast > 0.0) {
        return Err(invalid(format!("contrast must be positive, got {contrast}")));
    }
    if contrast == 1.0 && brightness == 0.0 {
        return Ok(x.clone());
    }
    let data = x
        .as_slice()
        .iter()
        .map(|p| (contrast * (p - 0.5) + 0.5 + brightness).clamp(0.0, 1.0))
        .collect();
    Ok(Image::from_valid(x.height(), x.width(), data))
}

/// Population variance over all intensities.
pub fn pixel_variance(x: &Image) -> f64 {
    let n = x.len() as f64;
    let mean = x.as_slice().iter().sum::<f64>() / n;
    x.as_slice().iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n
}

/// Clamps `candidate` into the L-infinity ball of radius `epsilon` around `x`
/// intersected with the unit cube.
pub fn project_linf(x: &Image, candidate: &Image, epsilon: f64) -> Result<Image> {
    x.ensure_same_shape(candidate)?;
    if !(epsilon >= 0.0) {
        return Err(invalid(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(candidate.as_slice())
        .map(|(&o, &c)| c.clamp((o - epsilon).max(0.0), (o + epsilon).min(1.0)))
        .collect();
    Ok(Image::from_valid(x.height(), x.width(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn photometric_identity_fixed_point_and_clamp() {
        let x = Image::from_fn(4, 5, |r, c, ch| (r + c + ch) as f64 / 12.0).unwrap();
        assert_eq!(adjust_photometric(&x, 1.0, 0.0).unwrap(), x);
        let half = Image::filled(3, 3, 0.5).unwrap();
        assert_eq!(adjust_photometric(&half, 0.8, 0.0).unwrap(), half);
        let ones = adjust_photometric(&x, 1.0, 2.0).unwrap();
        assert!(ones.as_slice().iter().all(|&v| v == 1.0));
        assert!(adjust_photometric(&x, 0.0, 0.0).is_err());
    }

    #[test]
    fn variance_cases() {
        assert!(pixel_variance(&Image::filled(5, 5, 0.3).unwrap()) < 1e-20);
        let half = Image::from_fn(4, 4, |r, _, _| if r < 2 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(pixel_variance(&half), 0.25);
    }

    #[test]
    fn variance_matches_two_pass_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let x = Image::from_fn(13, 7, |_, _, _| rng.gen()).unwrap();
        let v = x.as_slice();
        let mut mean = 0.0;
        for p in v {
            mean += p;
        }
        mean /= v.len() as f64;
        let mut acc = 0.0;
        for p in v {
            acc += (p - mean).powi(2);
        }
        assert!((pixel_variance(&x) - acc / v.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let x = Image::filled(3, 3, 0.5).unwrap();
        assert_eq!(project_linf(&x, &x, 0.1).unwrap(), x);
        let far = Image::filled(3, 3, 0.9).unwrap();
        assert_eq!(project_linf(&x, &far, 0.0).unwrap(), x);
        let p = project_linf(&x, &far, 0.1).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 0.6));
        assert!(project_linf(&x, &Image::filled(3, 4, 0.5).unwrap(), 0.1).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_feasible(
            xs in proptest::collection::vec(0.0f64..=1.0, 48),
            cs in proptest::collection::vec(0.0f64..=1.0, 48),
            eps in 0.0f64..0.5,
        ) {
            let x = Image::new(4, 4, xs).unwrap();
            let c = Image::new(4, 4, cs).unwrap();
            let p = project_linf(&x, &c, eps).unwrap();
            prop_assert!(p.linf_distance(&x).unwrap() <= eps + 1e-12);
            prop_assert!(p.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
