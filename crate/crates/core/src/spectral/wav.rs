use std::path::Path;

use super::SAMPLE_RATE;
use crate::error::{Error, Result};

fn format_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::AudioFormat(other.to_string()),
    }
}

/// Reads a mono 16-bit PCM WAV at 16 kHz into samples in `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let reader = hound::WavReader::open(path).map_err(format_err)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::AudioFormat(format!(
            "expected 16-bit signed PCM, got {} bits ({:?})",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.channels != 1 {
        return Err(Error::AudioFormat(format!(
            "expected mono audio, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::AudioFormat(format!(
            "expected sample rate {SAMPLE_RATE} Hz, got {} Hz",
            spec.sample_rate
        )));
    }
    reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0).map_err(format_err))
        .collect()
}

/// Writes samples as mono 16-bit PCM at 16 kHz, clipping to the i16 range.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(format_err)?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16;
        writer.write_sample(v).map_err(format_err)?;
    }
    writer.finalize().map_err(format_err)
}
