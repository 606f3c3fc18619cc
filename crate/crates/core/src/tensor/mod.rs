//! Dense row-major `f32` tensors and the primitive layers built on them.
//!
//! Feature maps use the `[channel, time, frequency]` layout throughout the
//! crate. Every primitive here is a pure function of its inputs.

mod activation;
mod conv;
mod gru;
mod linear;
mod norm;

pub use activation::{activation, gelu, relu6, sigmoid, softmax_in_place, star, Activation};
pub use conv::{conv2d, conv2d_transpose_freq, ConvSpec};
pub(crate) use conv::{conv_frame, conv_transpose_frame};
pub use gru::{gru_seq, GruParams};
pub use linear::linear;
pub(crate) use linear::{affine_into, dot as linear_dot};
pub use norm::{batch_norm_infer, layer_norm_cf, BatchNorm, LN_EPS};
pub(crate) use norm::{batch_norm_frame, layer_norm_frame};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Config(format!(
                "tensor of shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn from_vec(data: Vec<f32>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest absolute elementwise difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, x| m.max(x.abs()))
    }

    /// Checks the shape against `expected`, naming the tensor on failure.
    pub fn expect_shape(&self, name: &str, expected: &[usize]) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: expected.to_vec(),
                actual: self.shape.clone(),
            });
        }
        Ok(())
    }

    pub(crate) fn expect_rank(&self, name: &str, rank: usize) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::Config(format!(
                "`{name}` must be rank {rank}, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Copies frame `t` of a `[C, T, F]` tensor into a contiguous `[C, F]` buffer.
    pub(crate) fn read_frame(&self, t: usize, out: &mut [f32]) {
        let (c, tl, f) = (self.shape[0], self.shape[1], self.shape[2]);
        for ci in 0..c {
            let src = (ci * tl + t) * f;
            out[ci * f..(ci + 1) * f].copy_from_slice(&self.data[src..src + f]);
        }
    }

    /// Writes a contiguous `[C, F]` buffer into frame `t` of a `[C, T, F]` tensor.
    pub(crate) fn write_frame(&mut self, t: usize, frame: &[f32]) {
        let (c, tl, f) = (self.shape[0], self.shape[1], self.shape[2]);
        for ci in 0..c {
            let dst = (ci * tl + t) * f;
            self.data[dst..dst + f].copy_from_slice(&frame[ci * f..(ci + 1) * f]);
        }
    }
}
