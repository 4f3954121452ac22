//! The built-in classifier family:
//! conv3x3(3->c1) -> ReLU -> avgpool(p) -> conv3x3(c1->c2) -> ReLU -> global avgpool -> dense(c2->2).
//!
//! Activations are laid out row-major with channels innermost, like [`Image`].
//! Convolutions are stride 1 with one pixel of zero padding.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::imgmath::{GradientField, Image, CHANNELS};

/// Output classes. Index 0 is Fake, index 1 is Real.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake = 0,
    Real = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Fake
        } else {
            Label::Real
        }
    }
}

pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub conv1: usize,
    pub conv2: usize,
    pub pool: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            conv1: 8,
            conv2: 8,
            pool: 2,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.conv1 == 0 || self.conv2 == 0 || self.pool == 0 {
            return Err(invalid(format!("architecture sizes must be positive: {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn shapes(&self) -> [usize; 6] {
        [
            self.conv1 * CHANNELS * 9,
            self.conv1,
            self.conv2 * self.conv1 * 9,
            self.conv2,
            NUM_CLASSES * self.conv2,
            NUM_CLASSES,
        ]
    }
}

/// Parameter tensors in storage order.
///
/// Convolution weights are indexed `[out][in][ky][kx]`, dense weights `[class][feature]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

impl Params {
    pub fn zeros(arch: &Architecture) -> Self {
        let s = arch.shapes();
        Self {
            conv1_w: vec![0.0; s[0]],
            conv1_b: vec![0.0; s[1]],
            conv2_w: vec![0.0; s[2]],
            conv2_b: vec![0.0; s[3]],
            dense_w: vec![0.0; s[4]],
            dense_b: vec![0.0; s[5]],
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 6] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.dense_w,
            &self.dense_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense_w,
            &mut self.dense_b,
        ]
    }

    fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = f64::from(*v as f32));
        }
    }
}

/// A binary classifier with fixed parameters.
///
/// Parameter values are always representable as 32-bit floats; arithmetic
/// runs in 64 bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    arch: Architecture,
    params: Params,
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct Trace {
    h: usize,
    w: usize,
    hp: usize,
    wp: usize,
    z1: Vec<f64>,
    pooled: Vec<f64>,
    z2: Vec<f64>,
    features: Vec<f64>,
    pub logits: [f64; NUM_CLASSES],
}

/// Parameter gradients, same layout as [`Params`].
pub(crate) type ParamGrads = Params;

fn conv3x3_forward(
    input: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    weights: &[f64],
    bias: &[f64],
    cout: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; h * w * cout];
    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y * w + x) * cout..(y * w + x + 1) * cout];
            o.copy_from_slice(bias);
            for ky in 0..3 {
                let yy = y as isize + ky as isize - 1;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let xx = x as isize + kx as isize - 1;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let src = &input[(yy as usize * w + xx as usize) * cin..][..cin];
                    for (co, acc) in o.iter_mut().enumerate() {
                        let wrow = &weights[co * cin * 9..];
                        for (ci, &v) in src.iter().enumerate() {
                            *acc += wrow[ci * 9 + ky * 3 + kx] * v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns the gradient with respect to `input`; accumulates weight and bias
/// gradients when `param_grads` is given.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    weights: &[f64],
    cout: usize,
    dout: &[f64],
    mut param_grads: Option<(&mut [f64], &mut [f64])>,
) -> Vec<f64> {
    let mut din = vec![0.0; h * w * cin];
    for y in 0..h {
        for x in 0..w {
            let d = &dout[(y * w + x) * cout..(y * w + x + 1) * cout];
            if let Some((_, db)) = param_grads.as_mut() {
                for (b, g) in db.iter_mut().zip(d) {
                    *b += g;
                }
            }
            for ky in 0..3 {
                let yy = y as isize + ky as isize - 1;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let xx = x as isize + kx as isize - 1;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let base = (yy as usize * w + xx as usize) * cin;
                    for (co, &g) in d.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let widx = co * cin * 9 + ky * 3 + kx;
                        for ci in 0..cin {
                            din[base + ci] += g * weights[widx + ci * 9];
                        }
                        if let Some((dw, _)) = param_grads.as_mut() {
                            for ci in 0..cin {
                                dw[widx + ci * 9] += g * input[base + ci];
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

impl Classifier {
    pub fn new(arch: Architecture, mut params: Params) -> Result<Self> {
        arch.validate()?;
        for (t, n) in params.tensors().iter().zip(arch.shapes()) {
            if t.len() != n {
                return Err(shape(format!(
                    "parameter tensor of length {} where {n} expected",
                    t.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(invalid("parameters must be finite"));
            }
        }
        params.round_to_f32();
        Ok(Self { arch, params })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        Self::new(arch, Params::zeros(&arch))
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    fn check_input(&self, x: &Image) -> Result<()> {
        if x.height() < self.arch.pool || x.width() < self.arch.pool {
            return Err(shape(format!(
                "{}x{} input is smaller than the {} pooling window",
                x.height(),
                x.width(),
                self.arch.pool
            )));
        }
        Ok(())
    }

    pub(crate) fn trace(&self, x: &Image) -> Result<Trace> {
        self.check_input(x)?;
        let a = &self.arch;
        let p = &self.params;
        let (h, w) = (x.height(), x.width());
        let z1 = conv3x3_forward(x.as_slice(), h, w, CHANNELS, &p.conv1_w, &p.conv1_b, a.conv1);

        let (hp, wp) = (h / a.pool, w / a.pool);
        let inv = 1.0 / (a.pool * a.pool) as f64;
        let mut pooled = vec![0.0; hp * wp * a.conv1];
        for y in 0..hp * a.pool {
            for x in 0..wp * a.pool {
                let dst = ((y / a.pool) * wp + x / a.pool) * a.conv1;
                let src = (y * w + x) * a.conv1;
                for c in 0..a.conv1 {
                    pooled[dst + c] += z1[src + c].max(0.0) * inv;
                }
            }
        }

        let z2 = conv3x3_forward(&pooled, hp, wp, a.conv1, &p.conv2_w, &p.conv2_b, a.conv2);
        let mut features = vec![0.0; a.conv2];
        for px in z2.chunks_exact(a.conv2) {
            for (f, v) in features.iter_mut().zip(px) {
                *f += v.max(0.0);
            }
        }
        let area = (hp * wp) as f64;
        features.iter_mut().for_each(|f| *f /= area);

        let mut logits = [0.0; NUM_CLASSES];
        for (k, l) in logits.iter_mut().enumerate() {
            *l = p.dense_b[k]
                + p.dense_w[k * a.conv2..(k + 1) * a.conv2]
                    .iter()
                    .zip(&features)
                    .map(|(wt, f)| wt * f)
                    .sum::<f64>();
        }
        Ok(Trace {
            h,
            w,
            hp,
            wp,
            z1,
            pooled,
            z2,
            features,
            logits,
        })
    }

    /// Backpropagates `dlogits` through a recorded forward pass.
    pub(crate) fn backward(
        &self,
        x: &Image,
        tr: &Trace,
        dlogits: &[f64; NUM_CLASSES],
        mut param_grads: Option<&mut ParamGrads>,
    ) -> GradientField {
        let a = &self.arch;
        let p = &self.params;
        let (h, w, hp, wp) = (tr.h, tr.w, tr.hp, tr.wp);

        let mut dfeat = vec![0.0; a.conv2];
        for (k, &dl) in dlogits.iter().enumerate() {
            for (j, df) in dfeat.iter_mut().enumerate() {
                *df += dl * p.dense_w[k * a.conv2 + j];
            }
            if let Some(g) = param_grads.as_mut() {
                g.dense_b[k] += dl;
                for j in 0..a.conv2 {
                    g.dense_w[k * a.conv2 + j] += dl * tr.features[j];
                }
            }
        }

        let area = (hp * wp) as f64;
        let mut dz2 = vec![0.0; tr.z2.len()];
        for (i, (d, &z)) in dz2.iter_mut().zip(&tr.z2).enumerate() {
            if z > 0.0 {
                *d = dfeat[i % a.conv2] / area;
            }
        }
        let dpooled = conv3x3_backward(
            &tr.pooled,
            hp,
            wp,
            a.conv1,
            &p.conv2_w,
            a.conv2,
            &dz2,
            param_grads
                .as_mut()
                .map(|g| (g.conv2_w.as_mut_slice(), g.conv2_b.as_mut_slice())),
        );

        let inv = 1.0 / (a.pool * a.pool) as f64;
        let mut dz1 = vec![0.0; tr.z1.len()];
        for y in 0..hp * a.pool {
            for x in 0..wp * a.pool {
                let src = ((y / a.pool) * wp + x / a.pool) * a.conv1;
                let dst = (y * w + x) * a.conv1;
                for c in 0..a.conv1 {
                    if tr.z1[dst + c] > 0.0 {
                        dz1[dst + c] = dpooled[src + c] * inv;
                    }
                }
            }
        }
        let dx = conv3x3_backward(
            x.as_slice(),
            h,
            w,
            CHANNELS,
            &p.conv1_w,
            a.conv1,
            &dz1,
            param_grads
                .as_mut()
                .map(|g| (g.conv1_w.as_mut_slice(), g.conv1_b.as_mut_slice())),
        );
        GradientField::from_parts(h, w, dx)
    }

    /// Logits `[fake, real]`.
    pub fn forward(&self, x: &Image) -> Result<[f64; NUM_CLASSES]> {
        Ok(self.trace(x)?.logits)
    }

    pub fn probabilities(&self, x: &Image) -> Result<[f64; NUM_CLASSES]> {
        Ok(softmax(&self.forward(x)?))
    }

    /// Argmax of the logits; ties go to Fake.
    pub fn predict(&self, x: &Image) -> Result<Label> {
        let l = self.forward(x)?;
        Ok(if l[1] > l[0] { Label::Real } else { Label::Fake })
    }
}
