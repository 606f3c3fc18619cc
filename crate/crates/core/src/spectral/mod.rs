//! Spectral front end: STFT analysis/synthesis, ERB frequency compression,
//! dynamic-range compression, subband unfolding and mask application.

mod erb;
mod features;
mod stft;
mod wav;

pub use erb::{erb_rate, erb_rate_inverse, ErbBank, ERB_BANDS, ERB_HIGH_BANDS, ERB_KEEP_BINS};
pub use features::{
    apply_mask, compress, decompress_mask, sfe, CompressedFeatures, MAG_FLOOR, MASK_BETA,
};
pub(crate) use features::{compress_frame, decompress_frame, sfe_frame};
pub use stft::{istft, sqrt_hann, stft, ComplexSpectrogram, StftProcessor};
pub use wav::{read_wav, write_wav};

pub const SAMPLE_RATE: u32 = 16_000;
pub const FFT_SIZE: usize = 512;
pub const HOP_SIZE: usize = 256;
pub const NUM_BINS: usize = FFT_SIZE / 2 + 1;
/// STFT frames per second of audio.
pub const FRAMES_PER_SECOND: f64 = SAMPLE_RATE as f64 / HOP_SIZE as f64;
