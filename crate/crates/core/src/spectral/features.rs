use super::erb::{ErbBank, ERB_BANDS};
use super::stft::ComplexSpectrogram;
use super::NUM_BINS;
use crate::error::{config_err, Result};
use crate::tensor::{sigmoid, Tensor};

/// Magnitude floor applied before the logarithm and the power-law division.
pub const MAG_FLOOR: f32 = 1e-8;
/// Upper bound of the learnable-sigmoid mask.
pub const MASK_BETA: f32 = 1.2;

/// Log-compressed magnitude and power-law compressed real/imag parts, `[T, 129]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedFeatures {
    pub mag: Tensor,
    pub real: Tensor,
    pub imag: Tensor,
}

impl CompressedFeatures {
    /// Stacks (mag, real, imag) as channels: `[3, T, 129]`.
    pub fn stacked(&self) -> Tensor {
        let mut data = Vec::with_capacity(3 * self.mag.len());
        data.extend_from_slice(self.mag.data());
        data.extend_from_slice(self.real.data());
        data.extend_from_slice(self.imag.data());
        Tensor::new(vec![3, self.mag.dim(0), ERB_BANDS], data).expect("consistent shapes")
    }
}

/// Compresses one spectral frame into `out` laid out as `[3][129]`.
pub(crate) fn compress_frame(re: &[f32], im: &[f32], bank: &ErbBank, out: &mut [f32]) {
    let mut mag = [0.0f32; NUM_BINS];
    let mut r = [0.0f32; NUM_BINS];
    let mut i = [0.0f32; NUM_BINS];
    for k in 0..NUM_BINS {
        let m = (re[k] * re[k] + im[k] * im[k]).sqrt();
        mag[k] = m;
        let denom = m.max(MAG_FLOOR).powf(0.7);
        r[k] = re[k] / denom;
        i[k] = im[k] / denom;
    }
    let (o_mag, rest) = out.split_at_mut(ERB_BANDS);
    let (o_re, o_im) = rest.split_at_mut(ERB_BANDS);
    bank.compress_into(&mag, o_mag);
    for v in o_mag.iter_mut() {
        *v = v.max(MAG_FLOOR).log10();
    }
    bank.compress_into(&r, o_re);
    bank.compress_into(&i, &mut o_im[..ERB_BANDS]);
}

pub fn compress(spec: &ComplexSpectrogram, bank: &ErbBank) -> CompressedFeatures {
    let frames = spec.frames();
    let mut mag = Tensor::zeros(&[frames, ERB_BANDS]);
    let mut real = Tensor::zeros(&[frames, ERB_BANDS]);
    let mut imag = Tensor::zeros(&[frames, ERB_BANDS]);
    let mut buf = vec![0.0f32; 3 * ERB_BANDS];
    for t in 0..frames {
        compress_frame(
            &spec.real.data()[t * NUM_BINS..(t + 1) * NUM_BINS],
            &spec.imag.data()[t * NUM_BINS..(t + 1) * NUM_BINS],
            bank,
            &mut buf,
        );
        let rows = t * ERB_BANDS..(t + 1) * ERB_BANDS;
        mag.data_mut()[rows.clone()].copy_from_slice(&buf[..ERB_BANDS]);
        real.data_mut()[rows.clone()].copy_from_slice(&buf[ERB_BANDS..2 * ERB_BANDS]);
        imag.data_mut()[rows].copy_from_slice(&buf[2 * ERB_BANDS..]);
    }
    CompressedFeatures { mag, real, imag }
}

/// Unfolds neighbouring bands of a `[C][F]` frame into `[C * kernel][F]`.
pub(crate) fn sfe_frame(frame: &[f32], channels: usize, f: usize, kernel: usize, out: &mut [f32]) {
    let half = (kernel / 2) as isize;
    for c in 0..channels {
        for j in 0..kernel {
            let dst = &mut out[(c * kernel + j) * f..(c * kernel + j + 1) * f];
            for (band, d) in dst.iter_mut().enumerate() {
                let src = band as isize + j as isize - half;
                *d = if src >= 0 && (src as usize) < f {
                    frame[c * f + src as usize]
                } else {
                    0.0
                };
            }
        }
    }
}

/// Subband feature extraction: `[C, T, F]` → `[C * kernel, T, F]`.
///
/// Output channel `c * kernel + j` at band `f` holds input channel `c` at
/// band `f + j - kernel / 2` (zero outside the band range).
pub fn sfe(features: &Tensor, kernel: usize) -> Result<Tensor> {
    features.expect_rank("sfe input", 3)?;
    if kernel % 2 == 0 {
        return config_err(format!("sfe kernel must be odd, got {kernel}"));
    }
    let (c, t_len, f) = (features.dim(0), features.dim(1), features.dim(2));
    let mut out = Tensor::zeros(&[c * kernel, t_len, f]);
    let mut frame = vec![0.0; c * f];
    let mut unfolded = vec![0.0; c * kernel * f];
    for t in 0..t_len {
        features.read_frame(t, &mut frame);
        sfe_frame(&frame, c, f, kernel, &mut unfolded);
        out.write_frame(t, &unfolded);
    }
    Ok(out)
}

/// Expands one 129-band decoder frame to a 257-bin mask.
pub(crate) fn decompress_frame(d: &[f32], bank: &ErbBank, alpha: &[f32], beta: f32, out: &mut [f32]) {
    bank.expand_into(d, out);
    for (m, a) in out.iter_mut().zip(alpha) {
        *m = beta * sigmoid(a * *m);
    }
}

/// `mask = beta * sigmoid(alpha_f * (Mᵀ d))`, giving `[T, 257]` gains in `(0, beta)`.
pub fn decompress_mask(decoder_out: &Tensor, bank: &ErbBank, alpha: &Tensor, beta: f32) -> Result<Tensor> {
    decoder_out.expect_rank("decoder output", 2)?;
    if decoder_out.dim(1) != ERB_BANDS {
        return config_err(format!("decoder output must have {ERB_BANDS} bands"));
    }
    alpha.expect_shape("mask alpha", &[NUM_BINS])?;
    let frames = decoder_out.dim(0);
    let mut out = Tensor::zeros(&[frames, NUM_BINS]);
    for t in 0..frames {
        decompress_frame(
            &decoder_out.data()[t * ERB_BANDS..(t + 1) * ERB_BANDS],
            bank,
            alpha.data(),
            beta,
            &mut out.data_mut()[t * NUM_BINS..(t + 1) * NUM_BINS],
        );
    }
    Ok(out)
}

/// Scales real and imaginary parts by the mask, keeping the noisy phase.
pub fn apply_mask(mask: &Tensor, noisy: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    mask.expect_shape("mask", noisy.real.shape())?;
    let scale = |plane: &Tensor| {
        let data = plane.data().iter().zip(mask.data()).map(|(v, m)| v * m).collect();
        Tensor::new(plane.shape().to_vec(), data).expect("same shape")
    };
    Ok(ComplexSpectrogram {
        real: scale(&noisy.real),
        imag: scale(&noisy.imag),
    })
}
