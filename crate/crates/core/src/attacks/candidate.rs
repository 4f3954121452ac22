use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imgmath::{ssim, GradientField, Image};

/// Which attack stream produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    #[serde(rename = "MNTD-PGD")]
    MntdPgd,
    #[serde(rename = "SG-PGD")]
    SgPgd,
}

impl Stream {
    pub fn as_str(self) -> &'static str {
        match self {
            Stream::MntdPgd => "MNTD-PGD",
            Stream::SgPgd => "SG-PGD",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialCandidate {
    pub image: Image,
    /// `image - original`.
    pub delta: GradientField,
    pub epsilon_used: f64,
    pub stream: Stream,
    pub ssim_to_original: f64,
    /// One bit per surrogate: did it label the candidate Real.
    pub surrogate_fooled: Vec<bool>,
}

impl AdversarialCandidate {
    pub(crate) fn build(
        original: &Image,
        image: Image,
        epsilon_used: f64,
        stream: Stream,
        ssim_window: usize,
        surrogate_fooled: Vec<bool>,
    ) -> Result<Self> {
        let delta = image.diff(original)?;
        let ssim_to_original = ssim(original, &image, ssim_window)?;
        Ok(Self {
            image,
            delta,
            epsilon_used,
            stream,
            ssim_to_original,
            surrogate_fooled,
        })
    }

    /// The image this candidate was derived from, `image - delta`.
    pub fn reconstruct_original(&self) -> Vec<f64> {
        self.image
            .as_slice()
            .iter()
            .zip(self.delta.as_slice())
            .map(|(a, d)| a - d)
            .collect()
    }

    pub fn all_surrogates_fooled(&self) -> bool {
        !self.surrogate_fooled.is_empty() && self.surrogate_fooled.iter().all(|&b| b)
    }
}
