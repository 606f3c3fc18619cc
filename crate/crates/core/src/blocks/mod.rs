//! Composite layers: the basic and adaptive convolution blocks and the grouped
//! dual-path recurrence. Every layer has an offline forward over `[C, T, F]` and a
//! frame step for streaming; both read the same parameters.

mod block;
mod dprnn;

pub use block::{Block, BlockAttention, BlockOptions, BlockSpec, BlockState, PwActivation};
pub use dprnn::{DprnnSpec, DprnnState, GroupedDprnn};
