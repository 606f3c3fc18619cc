use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::{FFT_SIZE, HOP_SIZE};

/// Frames within this many dB of the loudest frame count as speech.
pub const VAD_RANGE_DB: f64 = 40.0;
/// Frames at or below this level are never speech, whatever the peak.
pub const VAD_FLOOR_DB: f64 = -120.0;
const ENERGY_MIN_DB: f64 = -200.0;

/// Dominant-kernel histogram of one VAD class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassSummary {
    pub frames: usize,
    pub counts: Vec<usize>,
    /// `counts / frames`; absent when the class has no frames.
    pub proportions: Option<Vec<f64>>,
}

impl ClassSummary {
    fn new(counts: Vec<usize>) -> Self {
        let frames: usize = counts.iter().sum();
        let proportions = (frames > 0).then(|| counts.iter().map(|&c| c as f64 / frames as f64).collect());
        Self {
            frames,
            counts,
            proportions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubLayerTrace {
    pub sub_layer: String,
    /// `[T][K]` kernel weights.
    pub weights: Vec<Vec<f32>>,
    pub dominant: Vec<usize>,
    pub speech: ClassSummary,
    pub non_speech: ClassSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttentionTrace {
    pub layer: String,
    pub kernels: usize,
    pub frames: usize,
    /// Mean-square level of each analysis frame of the input, dB.
    pub energy_db: Vec<f64>,
    pub vad: Vec<bool>,
    pub sub_layers: Vec<SubLayerTrace>,
}

/// Index of the largest weight; the lowest index wins ties.
fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Level of each analysis frame of `wave` padded as for inference.
fn frame_energy_db(wave: &[f32], frames: usize) -> Vec<f64> {
    (0..frames)
        .map(|t| {
            let start = t * HOP_SIZE;
            let sum: f64 = (start..start + FFT_SIZE)
                .map(|i| wave.get(i).map_or(0.0, |&v| (v as f64).powi(2)))
                .sum();
            let ms = sum / FFT_SIZE as f64;
            if ms > 0.0 {
                (10.0 * ms.log10()).max(ENERGY_MIN_DB)
            } else {
                ENERGY_MIN_DB
            }
        })
        .collect()
}

fn vad_flags(energy_db: &[f64]) -> Vec<bool> {
    let peak = energy_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    energy_db
        .iter()
        .map(|&e| e > VAD_FLOOR_DB && e >= peak - VAD_RANGE_DB)
        .collect()
}

/// Runs offline inference on `wave` and summarizes the kernel attention of
/// adaptive layer `layer` (for example `enc2`).
pub fn attention_trace(model: &Model, wave: &[f32], layer: &str) -> Result<AttentionTrace> {
    let available = model.adaptive_layers();
    if !available.iter().any(|l| l == layer) {
        return Err(Error::UnknownLayer {
            name: layer.to_string(),
            available,
        });
    }
    let run = model.run_offline(wave, true)?;
    let kernels = model.config().num_kernels;
    let energy_db = frame_energy_db(wave, run.frames);
    let vad = vad_flags(&energy_db);
    let mut sub_layers = Vec::new();
    if let Some((_, attn)) = run.attention.iter().find(|(n, _)| n == layer) {
        for (n, name) in ["dw", "pw1", "pw2"].iter().enumerate() {
            let w = attn.kernel_weights(n);
            let weights: Vec<Vec<f32>> = w.data().chunks(kernels).map(<[f32]>::to_vec).collect();
            let dominant: Vec<usize> = weights.iter().map(|r| argmax(r)).collect();
            let mut speech = vec![0; kernels];
            let mut non_speech = vec![0; kernels];
            for (&d, &v) in dominant.iter().zip(&vad) {
                if v {
                    speech[d] += 1;
                } else {
                    non_speech[d] += 1;
                }
            }
            sub_layers.push(SubLayerTrace {
                sub_layer: name.to_string(),
                weights,
                dominant,
                speech: ClassSummary::new(speech),
                non_speech: ClassSummary::new(non_speech),
            });
        }
    }
    Ok(AttentionTrace {
        layer: layer.to_string(),
        kernels,
        frames: run.frames,
        energy_db,
        vad,
        sub_layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::weights::init_random;

    fn model() -> Model {
        let cfg = ModelConfig::default();
        Model::build(&cfg, &init_random(&cfg, 8).unwrap()).unwrap()
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn silence_has_no_speech_frames() {
        let t = attention_trace(&model(), &vec![0.0; 4000], "enc0").unwrap();
        assert!(t.vad.iter().all(|&v| !v));
        for s in &t.sub_layers {
            assert_eq!(s.speech.frames, 0);
            assert!(s.speech.proportions.is_none());
            let p: f64 = s.non_speech.proportions.as_ref().unwrap().iter().sum();
            assert!((p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rows_sum_to_one_and_dominant_is_argmax() {
        let mut wave = vec![0.0f32; 8000];
        for (i, v) in wave.iter_mut().enumerate().skip(3000) {
            *v = 0.3 * (i as f32 * 0.05).sin();
        }
        let t = attention_trace(&model(), &wave, "dec1").unwrap();
        assert!(t.vad.iter().any(|&v| v) && t.vad.iter().any(|&v| !v));
        for s in &t.sub_layers {
            for (row, &d) in s.weights.iter().zip(&s.dominant) {
                let sum: f32 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-6);
                assert!(row.iter().all(|&v| v <= row[d]));
            }
            for class in [&s.speech, &s.non_speech] {
                if let Some(p) = &class.proportions {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn unknown_layer_lists_alternatives() {
        match attention_trace(&model(), &[0.0; 10], "enc9") {
            Err(Error::UnknownLayer { available, .. }) => assert_eq!(available.len(), 10),
            other => panic!("unexpected {other:?}"),
        }
    }
}
