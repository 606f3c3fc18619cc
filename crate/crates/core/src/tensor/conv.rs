use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{config_err, Result};

/// Geometry of a time-causal 2-D convolution over `[C, T, F]` features.
///
/// Time is always causal: `kernel_t - 1` zero frames are implicitly
/// left-padded, so output frame `t` reads input frames `t - kernel_t + 1 ..= t`.
/// Frequency is zero-padded symmetrically by `pad_f` bins per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel_t: usize,
    pub kernel_f: usize,
    pub stride_f: usize,
    pub groups: usize,
    pub pad_f: usize,
}

impl ConvSpec {
    /// Spec with "same"-style frequency padding `(kernel_f - 1) / 2`.
    pub fn new(kernel_t: usize, kernel_f: usize, stride_f: usize, groups: usize) -> Self {
        Self {
            kernel_t,
            kernel_f,
            stride_f,
            groups,
            pad_f: kernel_f.saturating_sub(1) / 2,
        }
    }

    pub fn pointwise() -> Self {
        Self::new(1, 1, 1, 1)
    }

    pub fn with_pad(mut self, pad_f: usize) -> Self {
        self.pad_f = pad_f;
        self
    }

    pub fn taps(&self) -> usize {
        self.kernel_t * self.kernel_f
    }

    pub fn out_freq(&self, f: usize) -> Result<usize> {
        let padded = f + 2 * self.pad_f;
        if padded < self.kernel_f {
            return config_err(format!(
                "frequency size {f} with padding {} is smaller than kernel {}",
                self.pad_f, self.kernel_f
            ));
        }
        Ok((padded - self.kernel_f) / self.stride_f + 1)
    }

    /// Output size of the transposed (upsampling) counterpart.
    pub fn out_freq_transposed(&self, f: usize) -> Result<usize> {
        let full = (f.max(1) - 1) * self.stride_f + self.kernel_f;
        if full < 2 * self.pad_f + 1 {
            return config_err("transposed convolution padding exceeds output size");
        }
        Ok(full - 2 * self.pad_f)
    }

    pub fn validate(&self, c_in: usize, c_out: usize) -> Result<()> {
        if self.kernel_t == 0 || self.kernel_f == 0 || self.stride_f == 0 || self.groups == 0 {
            return config_err(format!("degenerate convolution spec {self:?}"));
        }
        if c_in % self.groups != 0 || c_out % self.groups != 0 {
            return config_err(format!(
                "groups {} must divide channels (in {c_in}, out {c_out})",
                self.groups
            ));
        }
        Ok(())
    }
}

/// Computes output frame `t` of a causal convolution into `out` (`[C_out, F_out]`).
///
/// `input` is `[c_in, t_len, f_in]` row-major and `kernel` is
/// `[c_out, c_in / groups, kernel_t, kernel_f]`. Every convolution path in the
/// crate funnels through here, so the accumulation order is shared.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_frame(
    input: &[f32],
    c_in: usize,
    t_len: usize,
    f_in: usize,
    t: usize,
    kernel: &[f32],
    bias: Option<&[f32]>,
    c_out: usize,
    spec: &ConvSpec,
    f_out: usize,
    out: &mut [f32],
) {
    let cg_in = c_in / spec.groups;
    let cg_out = c_out / spec.groups;
    let (kt_len, kf_len) = (spec.kernel_t, spec.kernel_f);
    let (stride, pad) = (spec.stride_f, spec.pad_f);
    // Valid output range for each frequency tap.
    let ranges: Vec<(usize, usize)> = (0..kf_len)
        .map(|kf| {
            let lo = if pad > kf { (pad - kf).div_ceil(stride) } else { 0 };
            let hi = if f_in + pad > kf {
                ((f_in - 1 + pad - kf) / stride + 1).min(f_out)
            } else {
                0
            };
            (lo, hi.max(lo))
        })
        .collect();
    for o in 0..c_out {
        let g = o / cg_out;
        let orow = &mut out[o * f_out..(o + 1) * f_out];
        orow.fill(0.0);
        for ci in 0..cg_in {
            let c = g * cg_in + ci;
            for kt in 0..kt_len {
                let ti = t as isize - (kt_len - 1) as isize + kt as isize;
                if ti < 0 {
                    continue;
                }
                let row = &input[(c * t_len + ti as usize) * f_in..][..f_in];
                let wrow = &kernel[((o * cg_in + ci) * kt_len + kt) * kf_len..][..kf_len];
                for (kf, &w) in wrow.iter().enumerate() {
                    let (lo, hi) = ranges[kf];
                    if lo >= hi {
                        continue;
                    }
                    let first = lo * stride + kf - pad;
                    if stride == 1 {
                        for (acc, x) in orow[lo..hi].iter_mut().zip(&row[first..first + (hi - lo)]) {
                            *acc += x * w;
                        }
                    } else {
                        for (i, acc) in orow[lo..hi].iter_mut().enumerate() {
                            *acc += row[first + i * stride] * w;
                        }
                    }
                }
            }
        }
        if let Some(b) = bias {
            for v in orow.iter_mut() {
                *v += b[o];
            }
        }
    }
}

/// Frame `t` of a depthwise frequency-transposed convolution; `kernel` is `[C, K_f]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_transpose_frame(
    input: &[f32],
    channels: usize,
    t_len: usize,
    f_in: usize,
    t: usize,
    kernel: &[f32],
    bias: Option<&[f32]>,
    spec: &ConvSpec,
    f_out: usize,
    out: &mut [f32],
) {
    let kf_len = spec.kernel_f;
    let s = spec.stride_f as isize;
    for c in 0..channels {
        let row = &input[(c * t_len + t) * f_in..][..f_in];
        let w = &kernel[c * kf_len..][..kf_len];
        for fo in 0..f_out {
            let mut acc = 0.0f32;
            for (kf, wk) in w.iter().enumerate() {
                let n = fo as isize + spec.pad_f as isize - kf as isize;
                if n < 0 || n % s != 0 {
                    continue;
                }
                let fi = (n / s) as usize;
                if fi < f_in {
                    acc += row[fi] * wk;
                }
            }
            out[c * f_out + fo] = match bias {
                Some(b) => acc + b[c],
                None => acc,
            };
        }
    }
}

fn scatter_frame(out: &mut Tensor, t: usize, frame: &[f32]) {
    out.write_frame(t, frame);
}

/// Causal 2-D convolution: `[C_in, T, F]` → `[C_out, T, F_out]`.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    input.expect_rank("conv2d input", 3)?;
    kernel.expect_rank("conv2d kernel", 4)?;
    let (c_in, t_len, f_in) = (input.dim(0), input.dim(1), input.dim(2));
    let c_out = kernel.dim(0);
    spec.validate(c_in, c_out)?;
    kernel.expect_shape(
        "conv2d kernel",
        &[c_out, c_in / spec.groups, spec.kernel_t, spec.kernel_f],
    )?;
    bias.expect_shape("conv2d bias", &[c_out])?;
    let f_out = spec.out_freq(f_in)?;
    let mut out = Tensor::zeros(&[c_out, t_len, f_out]);
    let mut frame = vec![0.0; c_out * f_out];
    for t in 0..t_len {
        conv_frame(
            input.data(),
            c_in,
            t_len,
            f_in,
            t,
            kernel.data(),
            Some(bias.data()),
            c_out,
            spec,
            f_out,
            &mut frame,
        );
        scatter_frame(&mut out, t, &frame);
    }
    Ok(out)
}

/// Depthwise transposed convolution along frequency (`K_t = 1`).
///
/// `F_out = (F - 1) * stride - 2 * pad + K_f`; the map is the linear adjoint
/// of the strided depthwise [`conv2d`] with the same kernel.
pub fn conv2d_transpose_freq(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    spec: &ConvSpec,
) -> Result<Tensor> {
    input.expect_rank("transposed conv input", 3)?;
    let (c, t_len, f_in) = (input.dim(0), input.dim(1), input.dim(2));
    if spec.groups != c || spec.kernel_t != 1 {
        return config_err("transposed convolution must be depthwise with kernel_t = 1");
    }
    kernel.expect_shape("transposed conv kernel", &[c, 1, 1, spec.kernel_f])?;
    bias.expect_shape("transposed conv bias", &[c])?;
    let f_out = spec.out_freq_transposed(f_in)?;
    let mut out = Tensor::zeros(&[c, t_len, f_out]);
    let mut frame = vec![0.0; c * f_out];
    for t in 0..t_len {
        conv_transpose_frame(
            input.data(),
            c,
            t_len,
            f_in,
            t,
            kernel.data(),
            Some(bias.data()),
            spec,
            f_out,
            &mut frame,
        );
        scatter_frame(&mut out, t, &frame);
    }
    Ok(out)
}
