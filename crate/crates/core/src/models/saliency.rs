use super::loss::misclassification_gradient;
use super::network::{Classifier, Label};
use crate::error::Result;
use crate::imgmath::{GradientField, Image};

/// Absolute input gradient normalized to a maximum of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMask {
    values: GradientField,
}

impl SaliencyMask {
    /// Normalizes `|g|` by its maximum; an all-zero gradient yields an all-zero mask.
    pub fn from_gradient(g: &GradientField) -> Self {
        let max = g.max_abs();
        let values = if max > 0.0 {
            g.map(|v| v.abs() / max)
        } else {
            GradientField::zeros(g.height(), g.width())
        };
        Self { values }
    }

    pub fn values(&self) -> &GradientField {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }
}

pub fn saliency_map(model: &Classifier, x: &Image, target: Label) -> Result<SaliencyMask> {
    Ok(SaliencyMask::from_gradient(&misclassification_gradient(model, x, target)?))
}
