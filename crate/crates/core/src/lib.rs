//! Streaming speech enhancement with frame-wise adaptive convolution.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense `f32` primitives (causal convolution, GRU, norms, activations)
//! - [`spectral`]: STFT, ERB frequency compression, subband unfolding, masking, WAV IO
//! - [`adaptive`]: kernel attention, kernel aggregation and the three equivalent
//!   execution strategies for adaptive convolution
//! - [`blocks`]: basic/adaptive blocks and the grouped dual-path recurrence
//! - [`model`]: the full network, offline and hop-by-hop streaming inference
//! - [`weights`]: the `ACNW` weight container and the seeded initializer
//! - [`accounting`]: parameter/MAC accounting, SI-SNR and loss, attention traces
//! - [`verify`]: randomized property suites used by the CLI `verify` command

pub mod accounting;
pub mod adaptive;
pub mod blocks;
pub mod error;
pub mod model;
pub mod random;
pub mod spectral;
pub mod tensor;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig, StreamSession};
pub use tensor::Tensor;
pub use weights::WeightStore;

#[cfg(test)]
pub(crate) mod testutil {
    pub use crate::random::{seeded_rng as rng, uniform_tensor as rand_tensor};
}
