use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::tensor::{affine_into, sigmoid, softmax_in_place, GruParams, Tensor};

/// How the pooled descriptor is turned into a hidden attention feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// FC + ReLU on the current frame only.
    SingleFrame,
    /// Causal 1-D convolution over a short window of past frames + ReLU.
    MultiFrame,
    /// GRU carried across the whole stream.
    #[default]
    Temporal,
    /// One descriptor pooled over the whole utterance; offline only.
    GlobalUtterance,
}

impl AttentionMode {
    pub fn is_causal(self) -> bool {
        self != AttentionMode::GlobalUtterance
    }
}

/// Normalization applied to the kernel logits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Softmax,
    /// Learnable-slope PReLU instead of softmax; weights need not sum to one.
    PreluDirect,
}

/// Shape of one attention front end and its output heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionConfig {
    pub mode: AttentionMode,
    pub hidden: usize,
    /// Window of the multi-frame 1-D convolution.
    pub conv_kernel: usize,
    pub normalization: Normalization,
    /// Number of sub-layers sharing this front end (`N`).
    pub sub_layers: usize,
    /// Candidates per sub-layer (`K`).
    pub kernels: usize,
    pub chan_in: Option<usize>,
    pub chan_out: Option<usize>,
    /// `K_t * K_f` of the spatially attended kernel.
    pub spatial: Option<usize>,
}

impl AttentionConfig {
    pub fn head_outputs(&self) -> usize {
        self.sub_layers * self.kernels
            + self.chan_in.unwrap_or(0)
            + self.chan_out.unwrap_or(0)
            + self.spatial.unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.sub_layers == 0 || self.kernels == 0 {
            return config_err(format!("degenerate attention config {self:?}"));
        }
        if self.mode == AttentionMode::MultiFrame && self.conv_kernel == 0 {
            return config_err("multi-frame attention needs a positive window");
        }
        Ok(())
    }
}

/// `P(c, t) = mean_f Y(c, t, f)^2` for one `[C][F]` frame.
pub(crate) fn power_pool_frame(frame: &[f32], c: usize, f: usize, out: &mut [f32]) {
    for (ci, o) in out.iter_mut().enumerate().take(c) {
        let s: f64 = frame[ci * f..(ci + 1) * f].iter().map(|&v| (v as f64) * (v as f64)).sum();
        *o = (s / f as f64) as f32;
    }
}

/// Power average pooling over frequency: `[C, T, F]` → `[C, T]`.
pub fn power_pool(y: &Tensor) -> Result<Tensor> {
    y.expect_rank("power_pool input", 3)?;
    let (c, t_len, f) = (y.dim(0), y.dim(1), y.dim(2));
    if f == 0 {
        return config_err("power_pool needs at least one frequency bin");
    }
    let mut out = Tensor::zeros(&[c, t_len]);
    for ci in 0..c {
        for t in 0..t_len {
            let row = &y.data()[(ci * t_len + t) * f..][..f];
            let s: f64 = row.iter().map(|&v| (v as f64) * (v as f64)).sum();
            out.data_mut()[ci * t_len + t] = (s / f as f64) as f32;
        }
    }
    Ok(out)
}

/// Mean power per channel over every `(t, f)` of `[C, T, F]`.
pub(crate) fn global_descriptor(y: &Tensor) -> Vec<f32> {
    let (c, t_len, f) = (y.dim(0), y.dim(1), y.dim(2));
    let n = (t_len * f).max(1) as f64;
    (0..c)
        .map(|ci| {
            let s: f64 = y.data()[ci * t_len * f..(ci + 1) * t_len * f]
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum();
            (s / n) as f32
        })
        .collect()
}

/// Channel-modelling network mapping a `C`-dim descriptor to a hidden feature.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelModel {
    /// `weight [H, C]`, `bias [H]`.
    SingleFrame { weight: Tensor, bias: Tensor },
    /// `weight [H, C, window]` with the newest frame last, `bias [H]`.
    MultiFrame { weight: Tensor, bias: Tensor },
    Temporal { gru: GruParams },
    /// `weight [H, C]`, `bias [H]`, applied to the utterance-level descriptor.
    GlobalUtterance { weight: Tensor, bias: Tensor },
}

/// Per-stream memory of a [`ChannelModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    mode: AttentionMode,
    ring: Vec<f32>,
    hidden: Vec<f32>,
    scratch: Vec<f32>,
}

impl ChannelState {
    pub fn reset(&mut self) {
        self.ring.fill(0.0);
        self.hidden.fill(0.0);
    }
}

impl ChannelModel {
    pub fn new(mode: AttentionMode, weights: Vec<Tensor>) -> Result<Self> {
        let mut it = weights.into_iter();
        let mut next = |name: &str| {
            it.next()
                .ok_or_else(|| Error::Config(format!("channel model missing {name}")))
        };
        let model = match mode {
            AttentionMode::SingleFrame | AttentionMode::GlobalUtterance => {
                let weight = next("weight")?;
                let bias = next("bias")?;
                weight.expect_rank("channel model weight", 2)?;
                bias.expect_shape("channel model bias", &[weight.dim(0)])?;
                if mode == AttentionMode::SingleFrame {
                    ChannelModel::SingleFrame { weight, bias }
                } else {
                    ChannelModel::GlobalUtterance { weight, bias }
                }
            }
            AttentionMode::MultiFrame => {
                let weight = next("weight")?;
                let bias = next("bias")?;
                weight.expect_rank("channel conv weight", 3)?;
                bias.expect_shape("channel conv bias", &[weight.dim(0)])?;
                ChannelModel::MultiFrame { weight, bias }
            }
            AttentionMode::Temporal => {
                let gru = GruParams::new(next("w_ih")?, next("w_hh")?, next("b_ih")?, next("b_hh")?)?;
                ChannelModel::Temporal { gru }
            }
        };
        Ok(model)
    }

    pub fn mode(&self) -> AttentionMode {
        match self {
            ChannelModel::SingleFrame { .. } => AttentionMode::SingleFrame,
            ChannelModel::MultiFrame { .. } => AttentionMode::MultiFrame,
            ChannelModel::Temporal { .. } => AttentionMode::Temporal,
            ChannelModel::GlobalUtterance { .. } => AttentionMode::GlobalUtterance,
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            ChannelModel::SingleFrame { weight, .. }
            | ChannelModel::MultiFrame { weight, .. }
            | ChannelModel::GlobalUtterance { weight, .. } => weight.dim(1),
            ChannelModel::Temporal { gru } => gru.input(),
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            ChannelModel::SingleFrame { weight, .. }
            | ChannelModel::MultiFrame { weight, .. }
            | ChannelModel::GlobalUtterance { weight, .. } => weight.dim(0),
            ChannelModel::Temporal { gru } => gru.hidden(),
        }
    }

    fn window(&self) -> usize {
        match self {
            ChannelModel::MultiFrame { weight, .. } => weight.dim(2),
            _ => 1,
        }
    }

    pub fn new_state(&self) -> ChannelState {
        let c = self.input_size();
        ChannelState {
            mode: self.mode(),
            ring: vec![0.0; (self.window() - 1) * c],
            hidden: match self {
                ChannelModel::Temporal { gru } => vec![0.0; gru.hidden()],
                _ => Vec::new(),
            },
            scratch: Vec::new(),
        }
    }

    /// Advances one frame: descriptor `p` (`C`) → hidden feature `out` (`H`).
    pub fn step(&self, p: &[f32], state: &mut ChannelState, out: &mut [f32]) -> Result<()> {
        if state.mode != self.mode() || state.ring.len() != (self.window() - 1) * self.input_size() {
            return config_err(format!(
                "channel state for {:?} used with a {:?} model",
                state.mode,
                self.mode()
            ));
        }
        match self {
            ChannelModel::SingleFrame { weight, bias } => {
                affine_into(weight.data(), bias.data(), p, out);
                relu_in_place(out);
            }
            ChannelModel::MultiFrame { weight, bias } => {
                let (h, c, k) = (weight.dim(0), weight.dim(1), weight.dim(2));
                let w = weight.data();
                for (hi, o) in out.iter_mut().enumerate().take(h) {
                    let mut acc = bias.data()[hi];
                    for ci in 0..c {
                        let wr = &w[(hi * c + ci) * k..][..k];
                        for (j, wv) in wr.iter().enumerate() {
                            let x = if j + 1 == k { p[ci] } else { state.ring[j * c + ci] };
                            acc += wv * x;
                        }
                    }
                    *o = acc;
                }
                relu_in_place(&mut out[..h]);
                if k > 1 {
                    state.ring.copy_within(c.., 0);
                    let n = state.ring.len();
                    state.ring[n - c..].copy_from_slice(&p[..c]);
                }
            }
            ChannelModel::Temporal { gru } => {
                gru.step(p, &mut state.hidden, &mut state.scratch);
                out[..state.hidden.len()].copy_from_slice(&state.hidden);
            }
            ChannelModel::GlobalUtterance { .. } => {
                return Err(Error::UnsupportedMode(
                    "global utterance attention needs the whole utterance and cannot stream".into(),
                ));
            }
        }
        Ok(())
    }

    /// Applies the FC + ReLU of the global mode to a pooled descriptor.
    pub(crate) fn global_feature(&self, descriptor: &[f32], out: &mut [f32]) -> Result<()> {
        match self {
            ChannelModel::GlobalUtterance { weight, bias } => {
                affine_into(weight.data(), bias.data(), descriptor, out);
                relu_in_place(out);
                Ok(())
            }
            _ => config_err("global feature requested from a causal channel model"),
        }
    }
}

fn relu_in_place(xs: &mut [f32]) {
    for x in xs {
        *x = x.max(0.0);
    }
}

/// Runs the channel model over a `[C, T]` descriptor sequence, giving `[T, H]`.
///
/// The global mode pools over every frame and repeats its single feature.
pub fn channel_model(p: &Tensor, model: &ChannelModel, state: &mut ChannelState) -> Result<Tensor> {
    p.expect_rank("channel model input", 2)?;
    let (c, t_len) = (p.dim(0), p.dim(1));
    if c != model.input_size() {
        return config_err(format!(
            "channel model expects {} channels, got {c}",
            model.input_size()
        ));
    }
    let h = model.hidden();
    let mut out = Tensor::zeros(&[t_len, h]);
    if model.mode() == AttentionMode::GlobalUtterance {
        let desc: Vec<f32> = (0..c)
            .map(|ci| {
                let s: f64 = p.data()[ci * t_len..(ci + 1) * t_len].iter().map(|&v| v as f64).sum();
                (s / t_len.max(1) as f64) as f32
            })
            .collect();
        let mut feat = vec![0.0; h];
        model.global_feature(&desc, &mut feat)?;
        for row in out.data_mut().chunks_mut(h) {
            row.copy_from_slice(&feat);
        }
        return Ok(out);
    }
    let mut col = vec![0.0; c];
    for t in 0..t_len {
        for (ci, v) in col.iter_mut().enumerate() {
            *v = p.data()[ci * t_len + t];
        }
        model.step(&col, state, &mut out.data_mut()[t * h..(t + 1) * h])?;
    }
    Ok(out)
}

/// One affine layer producing every kernel-weight and map logit.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionHeads {
    weight: Tensor,
    bias: Tensor,
    cfg: AttentionConfig,
    prelu_slope: f32,
}

impl AttentionHeads {
    pub fn new(weight: Tensor, bias: Tensor, cfg: AttentionConfig, prelu_slope: f32) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.head_outputs();
        weight.expect_shape("attention head weight", &[n, cfg.hidden])?;
        bias.expect_shape("attention head bias", &[n])?;
        Ok(Self {
            weight,
            bias,
            cfg,
            prelu_slope,
        })
    }

    pub fn config(&self) -> &AttentionConfig {
        &self.cfg
    }

    /// Head output for one frame, laid out as
    /// `[N * K kernel weights | C_in map | C_out map | spatial map]`.
    pub fn apply_frame(&self, h: &[f32], out: &mut [f32]) {
        affine_into(self.weight.data(), self.bias.data(), h, out);
        let nk = self.cfg.sub_layers * self.cfg.kernels;
        match self.cfg.normalization {
            Normalization::Softmax => {
                for chunk in out[..nk].chunks_mut(self.cfg.kernels) {
                    softmax_in_place(chunk);
                }
            }
            Normalization::PreluDirect => {
                for v in &mut out[..nk] {
                    if *v < 0.0 {
                        *v *= self.prelu_slope;
                    }
                }
            }
        }
        for v in &mut out[nk..self.cfg.head_outputs()] {
            *v = sigmoid(*v);
        }
    }
}

/// Per-frame attention for every sub-layer of one front end.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutputs {
    /// `[N, T, K]`
    pub kernel: Tensor,
    /// `[T, C_in]`
    pub chan_in: Option<Tensor>,
    /// `[T, C_out]`
    pub chan_out: Option<Tensor>,
    /// `[T, K_t * K_f]`
    pub spatial: Option<Tensor>,
}

impl AttentionOutputs {
    /// Splits `T` concatenated head frames (see [`AttentionHeads::apply_frame`]).
    pub(crate) fn from_frames(cfg: &AttentionConfig, frames: &[f32]) -> Self {
        let n_out = cfg.head_outputs();
        let t_len = frames.len() / n_out;
        let (n, k) = (cfg.sub_layers, cfg.kernels);
        let mut kernel = Tensor::zeros(&[n, t_len, k]);
        for t in 0..t_len {
            let row = &frames[t * n_out..];
            for s in 0..n {
                kernel.data_mut()[(s * t_len + t) * k..][..k].copy_from_slice(&row[s * k..(s + 1) * k]);
            }
        }
        let mut offset = n * k;
        let mut take = |width: Option<usize>| {
            width.map(|w| {
                let mut m = Tensor::zeros(&[t_len, w]);
                for t in 0..t_len {
                    m.data_mut()[t * w..(t + 1) * w]
                        .copy_from_slice(&frames[t * n_out + offset..][..w]);
                }
                offset += w;
                m
            })
        };
        let chan_in = take(cfg.chan_in);
        let chan_out = take(cfg.chan_out);
        let spatial = take(cfg.spatial);
        Self {
            kernel,
            chan_in,
            chan_out,
            spatial,
        }
    }

    pub fn frames(&self) -> usize {
        self.kernel.dim(1)
    }

    /// Kernel weights `[T, K]` of sub-layer `n`.
    pub fn kernel_weights(&self, n: usize) -> Tensor {
        let (t_len, k) = (self.kernel.dim(1), self.kernel.dim(2));
        Tensor::new(
            vec![t_len, k],
            self.kernel.data()[n * t_len * k..(n + 1) * t_len * k].to_vec(),
        )
        .expect("slice of a consistent tensor")
    }
}

/// Applies the heads to every row of `[T, H]`.
pub fn attention_heads(h: &Tensor, heads: &AttentionHeads) -> Result<AttentionOutputs> {
    h.expect_rank("attention hidden", 2)?;
    if h.dim(1) != heads.cfg.hidden {
        return config_err(format!(
            "attention heads expect hidden size {}, got {}",
            heads.cfg.hidden,
            h.dim(1)
        ));
    }
    let n_out = heads.cfg.head_outputs();
    let mut frames = vec![0.0; h.dim(0) * n_out];
    for (row, out) in h.data().chunks(heads.cfg.hidden).zip(frames.chunks_mut(n_out)) {
        heads.apply_frame(row, out);
    }
    Ok(AttentionOutputs::from_frames(&heads.cfg, &frames))
}
