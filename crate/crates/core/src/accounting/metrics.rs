use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{stft, ComplexSpectrogram, HOP_SIZE};

/// Reported when the residual is negligible against the projected target.
pub const SI_SNR_CAP_DB: f64 = 100.0;
/// Reported when the estimate has no component along the reference.
pub const SI_SNR_FLOOR_DB: f64 = -100.0;
const RESIDUAL_RATIO: f64 = 1e-20;

fn check_lengths(est: &[f32], reference: &[f32]) -> Result<()> {
    if est.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            name: "estimate".into(),
            expected: vec![reference.len()],
            actual: vec![est.len()],
        });
    }
    Ok(())
}

/// Scale-invariant SNR in dB, clamped to `[-100, 100]`.
pub fn si_snr(est: &[f32], reference: &[f32]) -> Result<f64> {
    check_lengths(est, reference)?;
    let ref_energy: f64 = reference.iter().map(|&v| (v as f64).powi(2)).sum();
    if ref_energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    let dot: f64 = est.iter().zip(reference).map(|(&e, &r)| e as f64 * r as f64).sum();
    let scale = dot / ref_energy;
    let target = scale * scale * ref_energy;
    let residual: f64 = est
        .iter()
        .zip(reference)
        .map(|(&e, &r)| (e as f64 - scale * r as f64).powi(2))
        .sum();
    if target == 0.0 {
        return Ok(SI_SNR_FLOOR_DB);
    }
    if residual <= RESIDUAL_RATIO * target {
        return Ok(SI_SNR_CAP_DB);
    }
    Ok((10.0 * (target / residual).log10()).clamp(SI_SNR_FLOOR_DB, SI_SNR_CAP_DB))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossWeights {
    pub si_snr: f64,
    pub mag: f64,
    pub complex: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            si_snr: 0.01,
            mag: 0.7,
            complex: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossComponents {
    /// Negative log energy ratio without the dB factor, at least -10.
    pub si_snr: f64,
    pub mag: f64,
    pub real: f64,
    pub imag: f64,
    pub total: f64,
}

/// Compressed spectrum planes: `|S|^0.3` and `S_r,i / |S|^0.7` (zero where `|S| = 0`).
fn compressed_planes(spec: &ComplexSpectrogram) -> [Vec<f64>; 3] {
    let n = spec.real.len();
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, (&r, &im)) in spec.real.data().iter().zip(spec.imag.data()).enumerate() {
        let (r, im) = (r as f64, im as f64);
        let mag = (r * r + im * im).sqrt();
        planes[0][i] = mag.powf(0.3);
        if mag > 0.0 {
            let d = mag.powf(0.7);
            planes[1][i] = r / d;
            planes[2][i] = im / d;
        }
    }
    planes
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Weighted SI-SNR and compressed-spectrum loss. Both signals are zero padded
/// to whole hops plus one before the 257-bin STFT so every sample is framed.
pub fn loss_total(est: &[f32], reference: &[f32], weights: LossWeights) -> Result<LossComponents> {
    let si = -si_snr(est, reference)? / 10.0;
    let hops = est.len().div_ceil(HOP_SIZE).max(1) + 1;
    let pad = |x: &[f32]| {
        let mut v = x.to_vec();
        v.resize(hops * HOP_SIZE, 0.0);
        v
    };
    let pe = compressed_planes(&stft(&pad(est)));
    let pr = compressed_planes(&stft(&pad(reference)));
    let (mag, real, imag) = (mse(&pe[0], &pr[0]), mse(&pe[1], &pr[1]), mse(&pe[2], &pr[2]));
    Ok(LossComponents {
        si_snr: si,
        mag,
        real,
        imag,
        total: weights.si_snr * si + weights.mag * mag + weights.complex * (real + imag),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn noise(n: usize, seed: u64) -> Vec<f32> {
        let mut r = crate::random::seeded_rng(seed);
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identical_and_scaled_hit_the_cap() {
        let s = noise(1000, 1);
        assert_eq!(si_snr(&s, &s).unwrap(), 100.0);
        let twice: Vec<f32> = s.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_snr(&twice, &s).unwrap(), 100.0);
    }

    #[test]
    fn orthogonal_equal_energy_noise_is_zero_db() {
        let r = vec![1.0, 1.0, 0.0, 0.0];
        let e = vec![1.0, 1.0, 1.0, -1.0];
        assert!(si_snr(&e, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn reference_scale_invariance() {
        let s = noise(800, 2);
        let e = noise(800, 3);
        let base = si_snr(&e, &s).unwrap();
        for beta in [0.01f32, 0.5, 3.0, 250.0] {
            let scaled: Vec<f32> = s.iter().map(|v| v * beta).collect();
            assert!((si_snr(&e, &scaled).unwrap() - base).abs() < 1e-6);
        }
    }

    #[test]
    fn errors_and_floor() {
        assert!(matches!(si_snr(&[1.0], &[0.0]), Err(Error::ZeroReference)));
        assert!(si_snr(&[1.0, 2.0], &[1.0]).is_err());
        assert_eq!(si_snr(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), SI_SNR_FLOOR_DB);
    }

    #[test]
    fn identical_signals_give_minus_point_one() {
        let s = noise(3000, 4);
        let l = loss_total(&s, &s, LossWeights::default()).unwrap();
        assert_eq!((l.mag, l.real, l.imag), (0.0, 0.0, 0.0));
        assert_eq!(l.si_snr, -10.0);
        assert!((l.total + 0.1).abs() < 1e-12);
    }

    #[test]
    fn silent_estimate_mag_term() {
        let s = noise(1500, 5);
        let z = vec![0.0; 1500];
        let l = loss_total(&z, &s, LossWeights::default()).unwrap();
        let hops = 1500usize.div_ceil(256) + 1;
        let mut p = s.clone();
        p.resize(hops * 256, 0.0);
        let spec = stft(&p);
        let m = spec.magnitude();
        let expect = m.data().iter().map(|&v| (v as f64).powf(0.6)).sum::<f64>() / m.len() as f64;
        assert!((l.mag - expect).abs() < 1e-9 * expect);
        assert_eq!(l.si_snr, 10.0);
    }
}
