use super::Tensor;
use crate::error::{config_err, Result};

pub const LN_EPS: f32 = 1e-5;

/// Normalizes one `[C, F]` frame in place over all of its values, then
/// applies the elementwise affine `gamma`, `beta`.
pub(crate) fn layer_norm_frame(frame: &mut [f32], gamma: &[f32], beta: &[f32], eps: f32) {
    let n = frame.len() as f64;
    let mean = frame.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = frame
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let inv = 1.0 / (var + eps as f64).sqrt();
    for ((v, g), b) in frame.iter_mut().zip(gamma).zip(beta) {
        *v = (((*v as f64 - mean) * inv) as f32) * g + b;
    }
}

/// Layer normalization across channel and frequency for every frame of `[C, T, F]`.
pub fn layer_norm_cf(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor> {
    x.expect_rank("layer norm input", 3)?;
    let (c, t_len, f) = (x.dim(0), x.dim(1), x.dim(2));
    if c * f < 2 {
        return config_err("layer norm needs at least two values per frame");
    }
    gamma.expect_shape("layer norm gamma", &[c, f])?;
    beta.expect_shape("layer norm beta", &[c, f])?;
    let mut out = x.clone();
    let mut frame = vec![0.0; c * f];
    for t in 0..t_len {
        x.read_frame(t, &mut frame);
        layer_norm_frame(&mut frame, gamma.data(), beta.data(), eps);
        out.write_frame(t, &frame);
    }
    Ok(out)
}

/// Inference-time batch normalization statistics, one entry per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub eps: f32,
}

impl BatchNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    pub(crate) fn apply(&self, c: usize, v: f32) -> f32 {
        (v - self.mean[c]) / (self.var[c] + self.eps).sqrt() * self.gamma[c] + self.beta[c]
    }
}

/// Applies batch normalization to a `[C, F]` frame in place.
pub(crate) fn batch_norm_frame(frame: &mut [f32], bn: &BatchNorm) {
    let f = frame.len() / bn.channels();
    for (c, chunk) in frame.chunks_mut(f.max(1)).enumerate() {
        for v in chunk {
            *v = bn.apply(c, *v);
        }
    }
}

/// Batch normalization with fixed statistics over a `[C, ...]` tensor.
pub fn batch_norm_infer(x: &Tensor, bn: &BatchNorm) -> Result<Tensor> {
    if x.rank() == 0 || x.dim(0) != bn.channels() {
        return config_err(format!(
            "batch norm has {} channels, input shape {:?}",
            bn.channels(),
            x.shape()
        ));
    }
    let inner = x.len() / bn.channels();
    let mut out = x.clone();
    for (c, chunk) in out.data_mut().chunks_mut(inner.max(1)).enumerate() {
        for v in chunk {
            *v = bn.apply(c, *v);
        }
    }
    Ok(out)
}
