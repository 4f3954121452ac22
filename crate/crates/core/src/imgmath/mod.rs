//! Pixel-space numerics: image containers, SSIM, smoothing, diversity
//! transforms, gradient noise, photometric adjustment and projection.

mod diversity;
mod filter;
mod image;
mod perlin;
mod pixel;
pub mod ssim;

pub use self::diversity::{input_diversity, DiversityTransform};
pub use self::filter::{convolve_same, gaussian_kernel, GaussianKernel};
pub use self::image::{GradientField, Image, CHANNELS};
pub use self::perlin::perlin_noise;
pub use self::pixel::{adjust_photometric, pixel_variance, project_linf};
pub use self::ssim::{ssim, ssim_with_grad, DEFAULT_WINDOW};

pub(crate) use self::diversity::validate_scales;
