use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FFT_SIZE, HOP_SIZE, NUM_BINS};
use crate::tensor::Tensor;

/// Complex STFT with `NUM_BINS` one-sided bins per frame, stored as `[T, 257]` planes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub real: Tensor,
    pub imag: Tensor,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize) -> Self {
        Self {
            real: Tensor::zeros(&[frames, NUM_BINS]),
            imag: Tensor::zeros(&[frames, NUM_BINS]),
        }
    }

    pub fn frames(&self) -> usize {
        self.real.dim(0)
    }

    pub fn magnitude(&self) -> Tensor {
        let data = self
            .real
            .data()
            .iter()
            .zip(self.imag.data())
            .map(|(r, i)| (r * r + i * i).sqrt())
            .collect();
        Tensor::new(self.real.shape().to_vec(), data).expect("same shape")
    }
}

/// Periodic square-root Hann window; its square overlap-adds to one at 50% hop.
pub fn sqrt_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).sqrt())
        .collect()
}

/// Per-frame analysis and synthesis with cached FFT plans.
///
/// Transforms run in `f64`; frames and spectra are exchanged as `f32`.
pub struct StftProcessor {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Default for StftProcessor {
    fn default() -> Self {
        Self::new()
    }
}

impl StftProcessor {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(FFT_SIZE);
        let ifft = planner.plan_fft_inverse(FFT_SIZE);
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());
        Self {
            window: sqrt_hann(FFT_SIZE),
            fft,
            ifft,
            buf: vec![Complex::new(0.0, 0.0); FFT_SIZE],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
        }
    }

    /// Windowed forward transform of one 512-sample frame.
    pub fn analyze(&mut self, frame: &[f32], re: &mut [f32], im: &mut [f32]) {
        for ((b, &x), w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x as f64 * w, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for k in 0..NUM_BINS {
            re[k] = self.buf[k].re as f32;
            im[k] = self.buf[k].im as f32;
        }
    }

    /// Inverse transform of one frame followed by the synthesis window.
    pub fn synthesize(&mut self, re: &[f32], im: &[f32], out: &mut [f32]) {
        for k in 0..NUM_BINS {
            let v = Complex::new(re[k] as f64, im[k] as f64);
            self.buf[k] = v;
            if k > 0 && k < FFT_SIZE / 2 {
                self.buf[FFT_SIZE - k] = v.conj();
            }
        }
        self.buf[0].im = 0.0;
        self.buf[FFT_SIZE / 2].im = 0.0;
        self.ifft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / FFT_SIZE as f64;
        for ((o, b), w) in out.iter_mut().zip(&self.buf).zip(&self.window) {
            *o = (b.re * scale * w) as f32;
        }
    }
}

/// Number of full frames in a signal of `len` samples (no centering pad).
pub(crate) fn frame_count(len: usize) -> usize {
    if len < FFT_SIZE {
        0
    } else {
        (len - FFT_SIZE) / HOP_SIZE + 1
    }
}

/// Frame `t` covers samples `[t * 256, t * 256 + 512)`.
pub fn stft(wave: &[f32]) -> ComplexSpectrogram {
    let frames = frame_count(wave.len());
    let mut spec = ComplexSpectrogram::zeros(frames);
    let mut proc = StftProcessor::new();
    for t in 0..frames {
        let start = t * HOP_SIZE;
        let (re, im) = (
            &mut spec.real.data_mut()[t * NUM_BINS..(t + 1) * NUM_BINS],
            &mut spec.imag.data_mut()[t * NUM_BINS..(t + 1) * NUM_BINS],
        );
        let mut tmp_re = [0.0f32; NUM_BINS];
        let mut tmp_im = [0.0f32; NUM_BINS];
        proc.analyze(&wave[start..start + FFT_SIZE], &mut tmp_re, &mut tmp_im);
        re.copy_from_slice(&tmp_re);
        im.copy_from_slice(&tmp_im);
    }
    spec
}

/// Overlap-add resynthesis; output length is `(T - 1) * 256 + 512`.
pub fn istft(spec: &ComplexSpectrogram) -> Vec<f32> {
    let frames = spec.frames();
    if frames == 0 {
        return Vec::new();
    }
    let len = (frames - 1) * HOP_SIZE + FFT_SIZE;
    let mut acc = vec![0.0f64; len];
    let mut proc = StftProcessor::new();
    let mut frame = vec![0.0f32; FFT_SIZE];
    for t in 0..frames {
        proc.synthesize(
            &spec.real.data()[t * NUM_BINS..(t + 1) * NUM_BINS],
            &spec.imag.data()[t * NUM_BINS..(t + 1) * NUM_BINS],
            &mut frame,
        );
        for (a, &v) in acc[t * HOP_SIZE..].iter_mut().zip(&frame) {
            *a += v as f64;
        }
    }
    acc.into_iter().map(|v| v as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded_rng;
    use rand::Rng;

    fn noise(seed: u64, n: usize) -> Vec<f32> {
        let mut r = seeded_rng(seed);
        (0..n).map(|_| r.gen_range(-1.0f32..1.0)).collect()
    }

    #[test]
    fn window_squares_overlap_add_to_one() {
        let w = sqrt_hann(FFT_SIZE);
        for i in 0..HOP_SIZE {
            let s = w[i] * w[i] + w[i + HOP_SIZE] * w[i + HOP_SIZE];
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_interior() {
        let x = noise(1, 16_000);
        let y = istft(&stft(&x));
        let mut worst = 0.0f32;
        for i in FFT_SIZE..x.len() - FFT_SIZE {
            worst = worst.max((x[i] - y[i]).abs());
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn zero_signal_and_empty_input() {
        let s = stft(&vec![0.0; 2048]);
        assert!(s.real.data().iter().chain(s.imag.data()).all(|&v| v == 0.0));
        assert!(istft(&s).iter().all(|&v| v == 0.0));
        assert_eq!(stft(&[0.5; 100]).frames(), 0);
        assert!(istft(&ComplexSpectrogram::zeros(0)).is_empty());
    }

    #[test]
    fn sinusoid_energy_concentrated_at_bin_16() {
        let f0 = 500.0;
        let x: Vec<f32> = (0..8000)
            .map(|n| (2.0 * std::f64::consts::PI * f0 * n as f64 / 16_000.0).sin() as f32)
            .collect();
        let s = stft(&x);
        let mag = s.magnitude();
        for t in 1..s.frames() - 1 {
            let row = &mag.data()[t * NUM_BINS..(t + 1) * NUM_BINS];
            let total: f64 = row.iter().map(|&v| (v as f64).powi(2)).sum();
            let near: f64 = row[15..=17].iter().map(|&v| (v as f64).powi(2)).sum();
            assert!(near / total >= 0.95);
        }
    }

    // Direct DFT of one windowed frame, independent of the FFT path.
    #[test]
    fn matches_direct_dft_and_parseval() {
        let x = noise(2, 1024);
        let s = stft(&x);
        let w = sqrt_hann(FFT_SIZE);
        let frame: Vec<f64> = (0..FFT_SIZE).map(|n| x[256 + n] as f64 * w[n]).collect();
        let time_energy: f64 = frame.iter().map(|v| v * v).sum();
        let mut spec_energy = 0.0;
        for k in 0..NUM_BINS {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in frame.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / FFT_SIZE as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            assert!((s.real.data()[NUM_BINS + k] as f64 - re).abs() < 1e-4);
            assert!((s.imag.data()[NUM_BINS + k] as f64 - im).abs() < 1e-4);
            let e = (s.real.data()[NUM_BINS + k] as f64).powi(2) + (s.imag.data()[NUM_BINS + k] as f64).powi(2);
            spec_energy += if k == 0 || k == NUM_BINS - 1 { e } else { 2.0 * e };
        }
        spec_energy /= FFT_SIZE as f64;
        assert!((spec_energy - time_energy).abs() <= 1e-4 * time_energy);
    }
}
