use serde::{Deserialize, Serialize};

use crate::adaptive::{
    adaptive_conv_forward, conv_step, global_descriptor, power_pool, power_pool_frame, channel_model,
    AttentionConfig, AttentionHeads, AttentionMode, AttentionOutputs, ChannelModel, ChannelState,
    FrameRing, KernelAttention, KernelBank, KernelMaps, Normalization, Strategy,
};
use crate::error::{config_err, Error, Result};
use crate::tensor::{
    batch_norm_frame, gelu, layer_norm_cf, layer_norm_frame, star, BatchNorm, ConvSpec, Tensor, LN_EPS,
};
use crate::weights::{Init, ParamSpec, WeightStore};

/// Activation between the two pointwise convolutions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PwActivation {
    #[default]
    Gelu,
    Star,
}

impl PwActivation {
    #[inline]
    fn apply(self, x: f32) -> f32 {
        match self {
            PwActivation::Gelu => gelu(x),
            PwActivation::Star => star(x),
        }
    }
}

/// Geometry of one block: DW (`kernel`, `stride`) then PW `c_in → hidden → c_out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub hidden: usize,
    /// `(K_t, K_f)` of the depthwise convolution.
    pub kernel: [usize; 2],
    /// Frequency stride (upsampling factor when `transposed`).
    pub stride: usize,
    #[serde(default)]
    pub transposed: bool,
}

impl BlockSpec {
    pub fn dw_spec(&self) -> ConvSpec {
        ConvSpec::new(self.kernel[0], self.kernel[1], self.stride, self.c_in)
    }

    pub fn out_freq(&self, f_in: usize) -> Result<usize> {
        if self.transposed {
            self.dw_spec().out_freq_transposed(f_in)
        } else {
            self.dw_spec().out_freq(f_in)
        }
    }

    pub fn has_skip(&self) -> bool {
        self.stride == 1 && !self.transposed && self.c_in == self.c_out
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_in == 0 || self.c_out == 0 || self.hidden == 0 || self.stride == 0 {
            return config_err(format!("degenerate block {self:?}"));
        }
        if self.kernel[0] == 0 || self.kernel[1] == 0 {
            return config_err(format!("degenerate block kernel {:?}", self.kernel));
        }
        if self.transposed && self.kernel[0] != 1 {
            return config_err("transposed blocks need a time kernel of 1");
        }
        Ok(())
    }
}

/// Model-wide switches shared by every block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockOptions {
    pub adaptive: bool,
    pub kernels: usize,
    pub attention: AttentionMode,
    pub attention_hidden: usize,
    pub attention_conv_kernel: usize,
    pub normalization: Normalization,
    pub channel_attention: bool,
    pub spatial_attention: bool,
    pub activation: PwActivation,
    pub strategy: Strategy,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self {
            adaptive: true,
            kernels: 8,
            attention: AttentionMode::Temporal,
            attention_hidden: 32,
            attention_conv_kernel: 3,
            normalization: Normalization::Softmax,
            channel_attention: true,
            spatial_attention: false,
            activation: PwActivation::Gelu,
            strategy: Strategy::PerFrame,
        }
    }
}

impl BlockOptions {
    fn kernels(&self) -> usize {
        if self.adaptive {
            self.kernels
        } else {
            1
        }
    }

    pub fn attention_config(&self, spec: &BlockSpec) -> AttentionConfig {
        AttentionConfig {
            mode: self.attention,
            hidden: self.attention_hidden,
            conv_kernel: self.attention_conv_kernel,
            normalization: self.normalization,
            sub_layers: 3,
            kernels: self.kernels,
            chan_in: self.channel_attention.then_some(spec.c_in),
            chan_out: self.channel_attention.then_some(spec.c_out),
            spatial: self.spatial_attention.then_some(spec.kernel[0] * spec.kernel[1]),
        }
    }

    /// Shapes of the three banks' candidate tensors (without the `K` axis when static).
    fn bank_shapes(&self, spec: &BlockSpec) -> [Vec<usize>; 3] {
        let [kt, kf] = spec.kernel;
        let mut shapes = [
            vec![spec.c_in, 1, kt, kf],
            vec![spec.hidden, spec.c_in, 1, 1],
            vec![spec.c_out, spec.hidden, 1, 1],
        ];
        if self.adaptive {
            for s in &mut shapes {
                s.insert(0, self.kernels);
            }
        }
        shapes
    }
}

/// Attention front end of an adaptive block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockAttention {
    pub channel: ChannelModel,
    pub heads: AttentionHeads,
}

impl BlockAttention {
    /// Runs pooling, channel modelling and heads over a whole `[C, T, F]` input.
    pub fn compute(&self, y: &Tensor) -> Result<AttentionOutputs> {
        let t_len = y.dim(1);
        let cfg = *self.heads.config();
        let hidden = if self.channel.mode() == AttentionMode::GlobalUtterance {
            let mut feat = vec![0.0; self.channel.hidden()];
            self.channel.global_feature(&global_descriptor(y), &mut feat)?;
            let rows = (0..t_len).flat_map(|_| feat.iter().copied()).collect();
            Tensor::new(vec![t_len, feat.len()], rows)?
        } else {
            let pooled = power_pool(y)?;
            channel_model(&pooled, &self.channel, &mut self.channel.new_state())?
        };
        let n_out = cfg.head_outputs();
        let mut frames = vec![0.0; t_len * n_out];
        for (h, out) in hidden.data().chunks(cfg.hidden).zip(frames.chunks_mut(n_out)) {
            self.heads.apply_frame(h, out);
        }
        Ok(AttentionOutputs::from_frames(&cfg, &frames))
    }
}

/// Basic (static) or adaptive block:
/// LN → attention → `A^c` → DW → BN/PReLU → PW → act → PW → BN/PReLU → `A^f` → skip.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    spec: BlockSpec,
    f_in: usize,
    f_out: usize,
    ln_gamma: Tensor,
    ln_beta: Tensor,
    dw: KernelBank,
    pw1: KernelBank,
    pw2: KernelBank,
    bn1: BatchNorm,
    prelu1: Vec<f32>,
    bn2: BatchNorm,
    prelu2: Vec<f32>,
    activation: PwActivation,
    attention: Option<BlockAttention>,
    strategy: Strategy,
}

fn bn_specs(prefix: &str, c: usize, out: &mut Vec<ParamSpec>) {
    out.push(ParamSpec::new(format!("{prefix}.mean"), &[c], Init::Zeros));
    out.push(ParamSpec::new(format!("{prefix}.var"), &[c], Init::Ones));
    out.push(ParamSpec::new(format!("{prefix}.gamma"), &[c], Init::Ones));
    out.push(ParamSpec::new(format!("{prefix}.beta"), &[c], Init::Zeros));
}

fn load_bn(store: &WeightStore, prefix: &str, c: usize) -> Result<BatchNorm> {
    let get = |n: &str| store.fetch(&format!("{prefix}.{n}"), &[c]).map(Tensor::into_data);
    Ok(BatchNorm {
        mean: get("mean")?,
        var: get("var")?,
        gamma: get("gamma")?,
        beta: get("beta")?,
        eps: 1e-5,
    })
}

/// Parameters of an attention front end with `c_in` pooled channels.
pub(crate) fn attention_manifest(prefix: &str, cfg: &AttentionConfig, c_in: usize) -> Vec<ParamSpec> {
    let h = cfg.hidden;
    let mut v = Vec::new();
    match cfg.mode {
        AttentionMode::SingleFrame | AttentionMode::GlobalUtterance => {
            v.push(ParamSpec::uniform(format!("{prefix}.fc.weight"), &[h, c_in], c_in, h));
            v.push(ParamSpec::new(format!("{prefix}.fc.bias"), &[h], Init::Zeros));
        }
        AttentionMode::MultiFrame => {
            let k = cfg.conv_kernel;
            v.push(ParamSpec::uniform(format!("{prefix}.conv.weight"), &[h, c_in, k], c_in * k, h * k));
            v.push(ParamSpec::new(format!("{prefix}.conv.bias"), &[h], Init::Zeros));
        }
        AttentionMode::Temporal => v.extend(gru_manifest(&format!("{prefix}.gru"), c_in, h)),
    }
    let n = cfg.head_outputs();
    v.push(ParamSpec::uniform(format!("{prefix}.head.weight"), &[n, h], h, n));
    v.push(ParamSpec::new(format!("{prefix}.head.bias"), &[n], Init::Zeros));
    if cfg.normalization == Normalization::PreluDirect {
        v.push(ParamSpec::new(format!("{prefix}.prelu"), &[1], Init::Const(0.25)));
    }
    v
}

pub(crate) fn gru_manifest(prefix: &str, d: usize, h: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec::uniform(format!("{prefix}.w_ih"), &[3 * h, d], d, 3 * h),
        ParamSpec::uniform(format!("{prefix}.w_hh"), &[3 * h, h], h, 3 * h),
        ParamSpec::new(format!("{prefix}.b_ih"), &[3 * h], Init::Zeros),
        ParamSpec::new(format!("{prefix}.b_hh"), &[3 * h], Init::Zeros),
    ]
}

pub(crate) fn load_gru(store: &WeightStore, prefix: &str, d: usize, h: usize) -> Result<crate::tensor::GruParams> {
    crate::tensor::GruParams::new(
        store.fetch(&format!("{prefix}.w_ih"), &[3 * h, d])?,
        store.fetch(&format!("{prefix}.w_hh"), &[3 * h, h])?,
        store.fetch(&format!("{prefix}.b_ih"), &[3 * h])?,
        store.fetch(&format!("{prefix}.b_hh"), &[3 * h])?,
    )
}

pub(crate) fn load_attention(
    store: &WeightStore,
    prefix: &str,
    cfg: &AttentionConfig,
    c_in: usize,
) -> Result<BlockAttention> {
    let h = cfg.hidden;
    let channel = match cfg.mode {
        AttentionMode::SingleFrame | AttentionMode::GlobalUtterance => ChannelModel::new(
            cfg.mode,
            vec![
                store.fetch(&format!("{prefix}.fc.weight"), &[h, c_in])?,
                store.fetch(&format!("{prefix}.fc.bias"), &[h])?,
            ],
        )?,
        AttentionMode::MultiFrame => ChannelModel::new(
            cfg.mode,
            vec![
                store.fetch(&format!("{prefix}.conv.weight"), &[h, c_in, cfg.conv_kernel])?,
                store.fetch(&format!("{prefix}.conv.bias"), &[h])?,
            ],
        )?,
        AttentionMode::Temporal => ChannelModel::Temporal {
            gru: load_gru(store, &format!("{prefix}.gru"), c_in, h)?,
        },
    };
    let n = cfg.head_outputs();
    let slope = if cfg.normalization == Normalization::PreluDirect {
        store.fetch(&format!("{prefix}.prelu"), &[1])?.data()[0]
    } else {
        0.25
    };
    let heads = AttentionHeads::new(
        store.fetch(&format!("{prefix}.head.weight"), &[n, h])?,
        store.fetch(&format!("{prefix}.head.bias"), &[n])?,
        *cfg,
        slope,
    )?;
    Ok(BlockAttention { channel, heads })
}

impl Block {
    /// Parameter list of a block named `prefix` whose input has `f_in` bands.
    pub fn manifest(prefix: &str, spec: &BlockSpec, f_in: usize, opts: &BlockOptions) -> Result<Vec<ParamSpec>> {
        spec.validate()?;
        spec.out_freq(f_in)?;
        let mut v = vec![
            ParamSpec::new(format!("{prefix}.ln.gamma"), &[spec.c_in, f_in], Init::Ones),
            ParamSpec::new(format!("{prefix}.ln.beta"), &[spec.c_in, f_in], Init::Zeros),
        ];
        let [kt, kf] = spec.kernel;
        let shapes = opts.bank_shapes(spec);
        let fans = [
            (kt * kf, kt * kf),
            (spec.c_in, spec.hidden),
            (spec.hidden, spec.c_out),
        ];
        let bias_len = [spec.c_in, spec.hidden, spec.c_out];
        for (i, name) in ["dw", "pw1", "pw2"].iter().enumerate() {
            v.push(ParamSpec::uniform(format!("{prefix}.{name}.weight"), &shapes[i], fans[i].0, fans[i].1));
            v.push(ParamSpec::new(format!("{prefix}.{name}.bias"), &[bias_len[i]], Init::Zeros));
            if *name == "dw" {
                bn_specs(&format!("{prefix}.bn1"), spec.c_in, &mut v);
                v.push(ParamSpec::new(format!("{prefix}.prelu1"), &[spec.c_in], Init::Const(0.25)));
            }
        }
        bn_specs(&format!("{prefix}.bn2"), spec.c_out, &mut v);
        v.push(ParamSpec::new(format!("{prefix}.prelu2"), &[spec.c_out], Init::Const(0.25)));
        if opts.adaptive {
            v.extend(attention_manifest(&format!("{prefix}.attn"), &opts.attention_config(spec), spec.c_in));
        }
        Ok(v)
    }

    pub fn from_store(
        store: &WeightStore,
        prefix: &str,
        spec: &BlockSpec,
        f_in: usize,
        opts: &BlockOptions,
    ) -> Result<Self> {
        spec.validate()?;
        let f_out = spec.out_freq(f_in)?;
        if opts.adaptive && opts.strategy == Strategy::OutputAgg && opts.spatial_attention {
            return config_err("output aggregation cannot apply spatial attention");
        }
        let shapes = opts.bank_shapes(spec);
        let k = opts.kernels();
        let bank = |name: &str, shape: &[usize], bias: usize, conv: ConvSpec, transposed: bool| -> Result<KernelBank> {
            let w = store.fetch(&format!("{prefix}.{name}.weight"), shape)?;
            let b = store.fetch(&format!("{prefix}.{name}.bias"), &[bias])?;
            let mut full = vec![k];
            full.extend_from_slice(&shape[shape.len() - 4..]);
            let w = w.reshape(&full)?;
            if transposed {
                KernelBank::new_transposed(w, b, conv)
            } else {
                KernelBank::new(w, b, conv)
            }
        };
        let dw = bank("dw", &shapes[0], spec.c_in, spec.dw_spec(), spec.transposed)?;
        let pw1 = bank("pw1", &shapes[1], spec.hidden, ConvSpec::pointwise(), false)?;
        let pw2 = bank("pw2", &shapes[2], spec.c_out, ConvSpec::pointwise(), false)?;
        let attention = if opts.adaptive {
            Some(load_attention(store, &format!("{prefix}.attn"), &opts.attention_config(spec), spec.c_in)?)
        } else {
            None
        };
        Ok(Self {
            spec: *spec,
            f_in,
            f_out,
            ln_gamma: store.fetch(&format!("{prefix}.ln.gamma"), &[spec.c_in, f_in])?,
            ln_beta: store.fetch(&format!("{prefix}.ln.beta"), &[spec.c_in, f_in])?,
            dw,
            pw1,
            pw2,
            bn1: load_bn(store, &format!("{prefix}.bn1"), spec.c_in)?,
            prelu1: store.fetch(&format!("{prefix}.prelu1"), &[spec.c_in])?.into_data(),
            bn2: load_bn(store, &format!("{prefix}.bn2"), spec.c_out)?,
            prelu2: store.fetch(&format!("{prefix}.prelu2"), &[spec.c_out])?.into_data(),
            activation: opts.activation,
            attention,
            strategy: opts.strategy,
        })
    }

    pub fn spec(&self) -> &BlockSpec {
        &self.spec
    }

    pub fn f_in(&self) -> usize {
        self.f_in
    }

    pub fn f_out(&self) -> usize {
        self.f_out
    }

    pub fn attention(&self) -> Option<&BlockAttention> {
        self.attention.as_ref()
    }

    pub fn banks(&self) -> [&KernelBank; 3] {
        [&self.dw, &self.pw1, &self.pw2]
    }

    pub fn set_strategy(&mut self, strategy: Strategy) -> Result<()> {
        if strategy == Strategy::OutputAgg && self.attention.as_ref().is_some_and(|a| a.heads.config().spatial.is_some()) {
            return config_err("output aggregation cannot apply spatial attention");
        }
        self.strategy = strategy;
        Ok(())
    }

    fn sub_attention(&self, outputs: Option<&AttentionOutputs>, n: usize, t_len: usize) -> KernelAttention {
        match outputs {
            Some(a) => {
                let mut k = KernelAttention::new(a.kernel_weights(n));
                if n == 0 {
                    k.spatial = a.spatial.clone();
                }
                k
            }
            None => KernelAttention::new(Tensor::full(&[t_len, 1], 1.0)),
        }
    }

    /// Offline forward over `[C_in, T, F_in]`; also returns the attention when adaptive.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Option<AttentionOutputs>)> {
        x.expect_rank("block input", 3)?;
        if x.dim(0) != self.spec.c_in || x.dim(2) != self.f_in {
            return Err(Error::ShapeMismatch {
                name: "block input".into(),
                expected: vec![self.spec.c_in, x.dim(1), self.f_in],
                actual: x.shape().to_vec(),
            });
        }
        let t_len = x.dim(1);
        let mut y = layer_norm_cf(x, &self.ln_gamma, &self.ln_beta, LN_EPS)?;
        let attn = match &self.attention {
            Some(a) => Some(a.compute(&y)?),
            None => None,
        };
        if let Some(m) = attn.as_ref().and_then(|a| a.chan_in.as_ref()) {
            scale_channels(&mut y, m);
        }
        let mut z = adaptive_conv_forward(&y, &self.dw, &self.sub_attention(attn.as_ref(), 0, t_len), self.strategy)?;
        bn_prelu(&mut z, &self.bn1, &self.prelu1);
        let mut z = adaptive_conv_forward(&z, &self.pw1, &self.sub_attention(attn.as_ref(), 1, t_len), self.strategy)?;
        for v in z.data_mut() {
            *v = self.activation.apply(*v);
        }
        let mut z = adaptive_conv_forward(&z, &self.pw2, &self.sub_attention(attn.as_ref(), 2, t_len), self.strategy)?;
        bn_prelu(&mut z, &self.bn2, &self.prelu2);
        if let Some(m) = attn.as_ref().and_then(|a| a.chan_out.as_ref()) {
            scale_channels(&mut z, m);
        }
        if self.spec.has_skip() {
            for (o, i) in z.data_mut().iter_mut().zip(x.data()) {
                *o += i;
            }
        }
        Ok((z, attn))
    }

    pub fn new_state(&self) -> Result<BlockState> {
        let channel = match &self.attention {
            Some(a) if a.channel.mode() == AttentionMode::GlobalUtterance => {
                return Err(Error::UnsupportedMode(
                    "global utterance attention is offline only".into(),
                ))
            }
            Some(a) => Some(a.channel.new_state()),
            None => None,
        };
        let s = &self.spec;
        let n_out = self.attention.as_ref().map_or(0, |a| a.heads.config().head_outputs());
        Ok(BlockState {
            ring: FrameRing::new(s.c_in, s.kernel[0], self.f_in),
            channel,
            frame: vec![0.0; s.c_in * self.f_in],
            pooled: vec![0.0; s.c_in],
            hidden: vec![0.0; self.attention.as_ref().map_or(0, |a| a.channel.hidden())],
            head: vec![0.0; n_out],
            kernels: [
                vec![0.0; self.dw.kernel_len()],
                vec![0.0; self.pw1.kernel_len()],
                vec![0.0; self.pw2.kernel_len()],
            ],
            dw_out: vec![0.0; s.c_in * self.f_out],
            pw1_out: vec![0.0; s.hidden * self.f_out],
        })
    }

    /// Processes one `[C_in, F_in]` frame into `out` (`[C_out, F_out]`).
    pub fn step(&self, x: &[f32], st: &mut BlockState, out: &mut [f32]) -> Result<()> {
        let s = &self.spec;
        let (f_in, f_out) = (self.f_in, self.f_out);
        if x.len() != s.c_in * f_in || out.len() != s.c_out * f_out {
            return config_err("block step frame size mismatch");
        }
        st.frame.copy_from_slice(x);
        layer_norm_frame(&mut st.frame, self.ln_gamma.data(), self.ln_beta.data(), LN_EPS);
        let one = [1.0f32];
        let (k, n_out) = match &self.attention {
            Some(a) => {
                let cfg = a.heads.config();
                power_pool_frame(&st.frame, s.c_in, f_in, &mut st.pooled);
                let state = st.channel.as_mut().expect("adaptive block state");
                a.channel.step(&st.pooled, state, &mut st.hidden)?;
                a.heads.apply_frame(&st.hidden, &mut st.head);
                (cfg.kernels, cfg.sub_layers * cfg.kernels)
            }
            None => (1, 0),
        };
        let cfg = self.attention.as_ref().map(|a| *a.heads.config());
        let mut offset = n_out;
        let mut take = |w: Option<usize>| {
            w.map(|w| {
                let r = offset..offset + w;
                offset += w;
                r
            })
        };
        let chan_in = cfg.and_then(|c| take(c.chan_in));
        let chan_out = cfg.and_then(|c| take(c.chan_out));
        let spatial = cfg.and_then(|c| take(c.spatial));
        let weights = |n: usize| -> &[f32] {
            if cfg.is_some() {
                &st.head[n * k..(n + 1) * k]
            } else {
                &one
            }
        };
        if let Some(r) = &chan_in {
            let m = &st.head[r.clone()];
            for (c, chunk) in st.frame.chunks_mut(f_in).enumerate() {
                for v in chunk {
                    *v *= m[c];
                }
            }
        }
        let (a0, a1, a2) = (weights(0).to_vec(), weights(1).to_vec(), weights(2).to_vec());
        let spatial_map: Option<Vec<f32>> = spatial.map(|r| st.head[r].to_vec());
        let out_map: Option<Vec<f32>> = chan_out.map(|r| st.head[r].to_vec());

        st.ring.push(&st.frame);
        let dw_maps = KernelMaps {
            spatial: spatial_map.as_deref(),
            ..Default::default()
        };
        let ring_len = st.ring.len();
        conv_step(
            &self.dw,
            st.ring.data(),
            ring_len,
            f_in,
            ring_len - 1,
            &a0,
            &dw_maps,
            &mut st.kernels[0],
            f_out,
            &mut st.dw_out,
        );
        bn_prelu_frame(&mut st.dw_out, &self.bn1, &self.prelu1);
        conv_step(
            &self.pw1,
            &st.dw_out,
            1,
            f_out,
            0,
            &a1,
            &KernelMaps::default(),
            &mut st.kernels[1],
            f_out,
            &mut st.pw1_out,
        );
        for v in &mut st.pw1_out {
            *v = self.activation.apply(*v);
        }
        conv_step(
            &self.pw2,
            &st.pw1_out,
            1,
            f_out,
            0,
            &a2,
            &KernelMaps::default(),
            &mut st.kernels[2],
            f_out,
            out,
        );
        bn_prelu_frame(out, &self.bn2, &self.prelu2);
        if let Some(m) = &out_map {
            for (c, chunk) in out.chunks_mut(f_out).enumerate() {
                for v in chunk {
                    *v *= m[c];
                }
            }
        }
        if s.has_skip() {
            for (o, i) in out.iter_mut().zip(x) {
                *o += i;
            }
        }
        Ok(())
    }
}

/// Per-stream buffers of a [`Block`].
#[derive(Clone, Debug)]
pub struct BlockState {
    ring: FrameRing,
    channel: Option<ChannelState>,
    frame: Vec<f32>,
    pooled: Vec<f32>,
    hidden: Vec<f32>,
    head: Vec<f32>,
    kernels: [Vec<f32>; 3],
    dw_out: Vec<f32>,
    pw1_out: Vec<f32>,
}

impl BlockState {
    pub fn reset(&mut self) {
        self.ring.reset();
        if let Some(c) = &mut self.channel {
            c.reset();
        }
    }

    /// Raw head output of the most recent frame (kernel weights then maps).
    pub fn last_attention(&self) -> &[f32] {
        &self.head
    }
}

fn scale_channels(x: &mut Tensor, map: &Tensor) {
    let (c, t_len, f) = (x.dim(0), x.dim(1), x.dim(2));
    for ci in 0..c {
        for t in 0..t_len {
            let s = map.data()[t * c + ci];
            for v in &mut x.data_mut()[(ci * t_len + t) * f..][..f] {
                *v *= s;
            }
        }
    }
}

#[inline]
fn prelu(v: f32, a: f32) -> f32 {
    if v >= 0.0 {
        v
    } else {
        a * v
    }
}

fn bn_prelu(x: &mut Tensor, bn: &BatchNorm, slopes: &[f32]) {
    let inner = x.len() / slopes.len();
    for (ci, chunk) in x.data_mut().chunks_mut(inner.max(1)).enumerate() {
        for v in chunk {
            *v = prelu(bn.apply(ci, *v), slopes[ci]);
        }
    }
}

fn bn_prelu_frame(frame: &mut [f32], bn: &BatchNorm, slopes: &[f32]) {
    batch_norm_frame(frame, bn);
    let f = frame.len() / slopes.len();
    for (ci, chunk) in frame.chunks_mut(f).enumerate() {
        for v in chunk {
            *v = prelu(*v, slopes[ci]);
        }
    }
}
