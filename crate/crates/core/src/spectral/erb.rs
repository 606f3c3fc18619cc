use super::{NUM_BINS, SAMPLE_RATE, FFT_SIZE};
use crate::tensor::Tensor;

/// Bins kept verbatim (0 Hz up to 2 kHz).
pub const ERB_KEEP_BINS: usize = 65;
/// Triangular bands covering the remaining 192 bins (2 kHz to 8 kHz).
pub const ERB_HIGH_BANDS: usize = 64;
pub const ERB_BANDS: usize = ERB_KEEP_BINS + ERB_HIGH_BANDS;

const ERB_LOW_HZ: f64 = 2000.0;
const ERB_HIGH_HZ: f64 = 8000.0;

/// ERB-rate in Cams: `21.4 * log10(1 + 4.37 f / 1000)`.
pub fn erb_rate(f_hz: f64) -> f64 {
    21.4 * (1.0 + 4.37 * f_hz / 1000.0).log10()
}

pub fn erb_rate_inverse(erb: f64) -> f64 {
    (10f64.powf(erb / 21.4) - 1.0) * 1000.0 / 4.37
}

fn bin_hz(bin: usize) -> f64 {
    bin as f64 * SAMPLE_RATE as f64 / FFT_SIZE as f64
}

/// The `[129, 257]` frequency-compression matrix.
///
/// Rows 0–64 are unit vectors on bins 0–64. Rows 65–128 are triangles over
/// bins 65–256 whose centers are equally spaced on the ERB-rate scale between
/// 2 kHz and 8 kHz; each row is normalized to unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ErbBank {
    matrix: Tensor,
    centers_hz: Vec<f64>,
}

impl Default for ErbBank {
    fn default() -> Self {
        Self::new()
    }
}

impl ErbBank {
    pub fn new() -> Self {
        let lo = erb_rate(ERB_LOW_HZ);
        let hi = erb_rate(ERB_HIGH_HZ);
        let step = (hi - lo) / (ERB_HIGH_BANDS - 1) as f64;
        // One extra center on each side bounds the outer triangles.
        let centers: Vec<f64> = (-1..=ERB_HIGH_BANDS as i64)
            .map(|i| erb_rate_inverse(lo + step * i as f64))
            .collect();

        let mut m = vec![0.0f32; ERB_BANDS * NUM_BINS];
        for b in 0..ERB_KEEP_BINS {
            m[b * NUM_BINS + b] = 1.0;
        }
        for band in 0..ERB_HIGH_BANDS {
            let (left, center, right) = (centers[band], centers[band + 1], centers[band + 2]);
            let mut weights = vec![0.0f64; NUM_BINS];
            for (bin, w) in weights.iter_mut().enumerate().skip(ERB_KEEP_BINS) {
                let f = bin_hz(bin);
                *w = if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
            }
            let sum: f64 = weights.iter().sum();
            let row = ERB_KEEP_BINS + band;
            for (bin, w) in weights.iter().enumerate() {
                m[row * NUM_BINS + bin] = (w / sum) as f32;
            }
        }
        Self {
            matrix: Tensor::new(vec![ERB_BANDS, NUM_BINS], m).expect("static shape"),
            centers_hz: centers[1..=ERB_HIGH_BANDS].to_vec(),
        }
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    /// Center frequencies of the 64 triangular bands.
    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// `out = M v` for one 257-bin frame.
    pub fn compress_into(&self, v: &[f32], out: &mut [f32]) {
        let m = self.matrix.data();
        for (row, o) in out.iter_mut().enumerate().take(ERB_BANDS) {
            *o = crate::tensor::linear_dot(&m[row * NUM_BINS..(row + 1) * NUM_BINS], v);
        }
    }

    /// `out = Mᵀ v` for one 129-band frame.
    pub fn expand_into(&self, v: &[f32], out: &mut [f32]) {
        let m = self.matrix.data();
        for (bin, o) in out.iter_mut().enumerate().take(NUM_BINS) {
            let mut acc = 0.0f32;
            for (row, x) in v.iter().enumerate().take(ERB_BANDS) {
                acc += m[row * NUM_BINS + bin] * x;
            }
            *o = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_rows_are_unit_vectors() {
        let bank = ErbBank::new();
        let m = bank.matrix().data();
        for row in 0..ERB_KEEP_BINS {
            for bin in 0..NUM_BINS {
                let expected = if bin == row { 1.0 } else { 0.0 };
                assert_eq!(m[row * NUM_BINS + bin], expected);
            }
        }
    }

    #[test]
    fn rows_sum_to_one_and_columns_covered() {
        let bank = ErbBank::new();
        let m = bank.matrix().data();
        for row in 0..ERB_BANDS {
            let s: f64 = m[row * NUM_BINS..(row + 1) * NUM_BINS].iter().map(|&v| v as f64).sum();
            assert!((s - 1.0).abs() < 1e-6, "row {row} sums to {s}");
        }
        for bin in 0..NUM_BINS {
            assert!((0..ERB_BANDS).any(|r| m[r * NUM_BINS + bin] > 0.0), "bin {bin} uncovered");
        }
        assert!(m.iter().all(|&v| v >= 0.0));
        // High bands never touch the preserved bins.
        for row in ERB_KEEP_BINS..ERB_BANDS {
            assert!(m[row * NUM_BINS..row * NUM_BINS + ERB_KEEP_BINS].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn centers_equally_spaced_on_erb_scale() {
        let bank = ErbBank::new();
        // Recompute the scale locally rather than through `erb_rate`.
        let scale = |f: f64| 21.4 * (1.0 + 0.00437 * f).log10();
        let c = bank.centers_hz();
        assert_eq!(c.len(), 64);
        assert!((c[0] - 2000.0).abs() < 1e-6 && (c[63] - 8000.0).abs() < 1e-6);
        let step = (scale(8000.0) - scale(2000.0)) / 63.0;
        for w in c.windows(2) {
            assert!((scale(w[1]) - scale(w[0]) - step).abs() < 1e-6);
        }
    }

    #[test]
    fn transpose_restores_low_band_vectors() {
        let bank = ErbBank::new();
        let mut v = vec![0.0f32; ERB_BANDS];
        for (i, x) in v.iter_mut().enumerate().take(ERB_KEEP_BINS) {
            *x = (i as f32 * 0.37).sin();
        }
        let mut out = vec![0.0f32; NUM_BINS];
        bank.expand_into(&v, &mut out);
        assert_eq!(&out[..ERB_KEEP_BINS], &v[..ERB_KEEP_BINS]);
        assert!(out[ERB_KEEP_BINS..].iter().all(|&x| x == 0.0));
    }
}
