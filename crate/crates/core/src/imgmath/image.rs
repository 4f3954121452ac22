use std::path::Path;

use crate::error::{invalid, shape, Error, Result};

/// Number of color channels. Images are always RGB.
pub const CHANNELS: usize = 3;

/// An RGB image with unit-interval intensities stored row-major as (row, column, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// A per-pixel real field with the same layout as [`Image`] but unbounded values.
///
/// Used for loss gradients, momentum buffers, perturbations and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

fn check_dims(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(invalid(format!(
            "image dimensions must be positive, got {height}x{width}"
        )));
    }
    if len != height * width * CHANNELS {
        return Err(shape(format!(
            "buffer of {len} values does not match {height}x{width}x{CHANNELS}"
        )));
    }
    Ok(())
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len())?;
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds an image whose pixels are already known to be in range.
    pub(crate) fn from_valid(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * CHANNELS);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * CHANNELS])
    }

    /// Builds an image from `f(row, col, channel)`, clamping each value into [0, 1].
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(height, width, height * width * CHANNELS)?;
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..CHANNELS {
                    data.push(f(r, c, ch).clamp(0.0, 1.0));
                }
            }
        }
        Ok(Self::from_valid(height, width, data))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * CHANNELS + ch]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(shape(format!(
                "{}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )))
        }
    }

    /// `self - other` as a field.
    pub fn diff(&self, other: &Image) -> Result<GradientField> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(GradientField::from_parts(self.height, self.width, data))
    }

    /// Largest absolute per-pixel difference.
    pub fn linf_distance(&self, other: &Image) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Adds a field and clamps the result into [0, 1].
    pub fn add_clamped(&self, field: &GradientField) -> Result<Image> {
        if self.height != field.height || self.width != field.width {
            return Err(shape("field does not match image"));
        }
        let data = self
            .data
            .iter()
            .zip(&field.data)
            .map(|(p, d)| (p + d).clamp(0.0, 1.0))
            .collect();
        Ok(Image::from_valid(self.height, self.width, data))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Image::new(h as usize, w as usize, data)
    }

    /// Quantizes to 8 bits with round-half-up.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// The image after an 8-bit round trip.
    pub fn quantized(&self) -> Image {
        let data = self.to_rgb8().iter().map(|&b| f64::from(b) / 255.0).collect();
        Image::from_valid(self.height, self.width, data)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl GradientField {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len())?;
        Ok(Self::from_parts(height, width, data))
    }

    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * CHANNELS);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::from_parts(height, width, vec![0.0; height * width * CHANNELS])
    }

    pub fn zeros_like(image: &Image) -> Self {
        Self::zeros(image.height, image.width)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * CHANNELS + ch]
    }

    pub fn matches(&self, image: &Image) -> bool {
        self.height == image.height && self.width == image.width
    }

    pub fn same_shape(&self, other: &GradientField) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GradientField {
        Self::from_parts(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GradientField, scale: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(shape("gradient fields differ in shape"));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
