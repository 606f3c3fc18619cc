//! Frame-wise adaptive convolution.
//!
//! Each frame `t` mixes `K` candidate kernels with attention weights
//! `A_k(t)` computed causally from a pooled energy descriptor. Three
//! execution strategies produce the same output:
//!
//! - [`Strategy::PerFrame`]: assemble the mixed kernel for each frame, then convolve
//! - [`Strategy::OutputAgg`]: run `K` static convolutions and mix their outputs
//! - [`Strategy::GroupedUnfold`]: unfold the causal window of every frame into
//!   channel groups and run one grouped convolution against stacked kernels

mod attention;
mod bank;
mod forward;
mod reparam;

pub use attention::{
    attention_heads, channel_model, power_pool, AttentionConfig, AttentionHeads, AttentionMode,
    AttentionOutputs, ChannelModel, ChannelState, Normalization,
};
pub(crate) use attention::{global_descriptor, power_pool_frame};
pub use bank::{aggregate_kernel, KernelBank, KernelMaps};
pub use forward::{adaptive_conv_forward, global_dynconv_forward, KernelAttention, Strategy};
pub(crate) use forward::{conv_step, FrameRing};
pub use reparam::{reparam_pw_pair, ReparamPair};
