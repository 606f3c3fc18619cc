use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptive::{AttentionMode, Normalization, Strategy};
use crate::blocks::{BlockOptions, BlockSpec, DprnnSpec, PwActivation};
use crate::error::{config_err, Result};
use crate::spectral::ERB_BANDS;

fn default_true() -> bool {
    true
}
fn default_kernels() -> usize {
    8
}
fn default_hidden() -> usize {
    32
}
fn default_conv_kernel() -> usize {
    3
}
fn default_sfe() -> usize {
    3
}
fn default_dprnn_count() -> usize {
    2
}
fn default_beta() -> f32 {
    1.2
}

fn block(c_in: usize, c_out: usize, hidden: usize, kernel: [usize; 2], stride: usize, transposed: bool) -> BlockSpec {
    BlockSpec {
        c_in,
        c_out,
        hidden,
        kernel,
        stride,
        transposed,
    }
}

pub fn default_encoder() -> Vec<BlockSpec> {
    vec![
        block(9, 16, 16, [1, 5], 2, false),
        block(16, 16, 16, [1, 5], 2, false),
        block(16, 16, 16, [3, 3], 1, false),
        block(16, 16, 16, [3, 3], 1, false),
        block(16, 16, 16, [3, 3], 1, false),
    ]
}

pub fn default_decoder() -> Vec<BlockSpec> {
    vec![
        block(16, 16, 16, [3, 3], 1, false),
        block(16, 16, 16, [3, 3], 1, false),
        block(16, 16, 16, [3, 3], 1, false),
        block(16, 16, 16, [1, 5], 2, true),
        block(16, 1, 4, [1, 5], 2, true),
    ]
}

/// Complete network description. Every field has a default, so `{}` is the
/// reference model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_true")]
    pub adaptive: bool,
    #[serde(default = "default_kernels")]
    pub num_kernels: usize,
    #[serde(default)]
    pub attention_mode: AttentionMode,
    #[serde(default = "default_hidden")]
    pub attention_hidden: usize,
    #[serde(default = "default_conv_kernel")]
    pub attention_conv_kernel: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_true")]
    pub channel_attention: bool,
    #[serde(default)]
    pub spatial_attention: bool,
    #[serde(default)]
    pub activation: PwActivation,
    /// Execution strategy of adaptive convolutions in offline inference.
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_sfe")]
    pub sfe_kernel: usize,
    #[serde(default = "default_encoder")]
    pub encoder: Vec<BlockSpec>,
    #[serde(default = "default_decoder")]
    pub decoder: Vec<BlockSpec>,
    #[serde(default = "default_dprnn_count")]
    pub dprnn_count: usize,
    #[serde(default)]
    pub dprnn: DprnnSpec,
    /// Upper bound of the magnitude mask.
    #[serde(default = "default_beta")]
    pub mask_beta: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Feature shape `(channels, bands)` entering or leaving a layer.
pub type Shape2 = (usize, usize);

/// Resolved per-layer frequency sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    /// Input `(C, F)` of each encoder block; the last entry is the encoder output.
    pub encoder: Vec<Shape2>,
    pub decoder: Vec<Shape2>,
    pub bottleneck: Shape2,
}

impl ModelConfig {
    pub fn no_adaptive() -> Self {
        Self {
            adaptive: false,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form; stable across runs and platforms.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn block_options(&self) -> BlockOptions {
        BlockOptions {
            adaptive: self.adaptive,
            kernels: self.num_kernels,
            attention: self.attention_mode,
            attention_hidden: self.attention_hidden,
            attention_conv_kernel: self.attention_conv_kernel,
            normalization: self.normalization,
            channel_attention: self.channel_attention,
            spatial_attention: self.spatial_attention,
            activation: self.activation,
            strategy: self.strategy,
        }
    }

    /// Checks the layer chain and returns every block's input shape.
    pub fn layout(&self) -> Result<Layout> {
        if self.encoder.is_empty() || self.encoder.len() != self.decoder.len() {
            return config_err(format!(
                "encoder ({}) and decoder ({}) must have the same nonzero depth",
                self.encoder.len(),
                self.decoder.len()
            ));
        }
        if self.adaptive && (self.num_kernels == 0 || self.attention_hidden == 0) {
            return config_err("adaptive layers need at least one kernel and a positive attention width");
        }
        if self.sfe_kernel % 2 == 0 {
            return config_err("sfe_kernel must be odd");
        }
        if !(self.mask_beta > 0.0) {
            return config_err("mask_beta must be positive");
        }
        let mut shape = (3 * self.sfe_kernel, ERB_BANDS);
        let mut encoder = Vec::new();
        for (i, b) in self.encoder.iter().enumerate() {
            b.validate()?;
            if b.c_in != shape.0 {
                return config_err(format!("enc{i} expects {} channels but receives {}", b.c_in, shape.0));
            }
            encoder.push(shape);
            shape = (b.c_out, b.out_freq(shape.1)?);
        }
        let bottleneck = shape;
        encoder.push(bottleneck);
        let n = self.encoder.len();
        let mut decoder = Vec::new();
        for (i, b) in self.decoder.iter().enumerate() {
            b.validate()?;
            let skip = encoder[n - i];
            if shape != skip {
                return config_err(format!(
                    "dec{i} input {shape:?} does not match skip from encoder level {} {skip:?}",
                    n - i
                ));
            }
            if b.c_in != shape.0 {
                return config_err(format!("dec{i} expects {} channels but receives {}", b.c_in, shape.0));
            }
            decoder.push(shape);
            shape = (b.c_out, b.out_freq(shape.1)?);
        }
        if shape != (1, ERB_BANDS) {
            return config_err(format!("decoder must end at (1, {ERB_BANDS}), got {shape:?}"));
        }
        if self.dprnn_count > 0 {
            self.dprnn.validate(bottleneck.0)?;
        }
        Ok(Layout {
            encoder,
            decoder,
            bottleneck,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.layout().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default_and_valid() {
        let c = ModelConfig::from_json("{}").unwrap();
        assert_eq!(c, ModelConfig::default());
        let l = c.layout().unwrap();
        let freqs: Vec<usize> = l.encoder.iter().map(|s| s.1).collect();
        assert_eq!(freqs, vec![129, 65, 33, 33, 33, 33]);
        let dec: Vec<usize> = l.decoder.iter().map(|s| s.1).collect();
        assert_eq!(dec, vec![33, 33, 33, 33, 65]);
        assert_eq!(c.num_kernels, 8);
        assert_eq!(c.attention_hidden, 32);
    }

    #[test]
    fn round_trip_and_hash() {
        let c = ModelConfig::default();
        let back = ModelConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(ModelConfig::no_adaptive().hash(), c.hash());
    }

    #[test]
    fn rejects_unknown_fields_and_broken_chains() {
        assert!(ModelConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ModelConfig::from_json(r#"{"attention_mode": "sideways"}"#).is_err());
        let mut c = ModelConfig::default();
        c.decoder.pop();
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.encoder[1].stride = 1;
        assert!(c.validate().is_err());
    }
}
