use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bank::{aggregate_into, check_maps, KernelBank, KernelMaps};
use crate::error::{config_err, Error, Result};
use crate::tensor::{conv_frame, conv_transpose_frame, ConvSpec, Tensor};

/// Execution strategy for an adaptive convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    PerFrame,
    OutputAgg,
    GroupedUnfold,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::PerFrame, Strategy::OutputAgg, Strategy::GroupedUnfold];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::PerFrame => "per_frame",
            Strategy::OutputAgg => "output_agg",
            Strategy::GroupedUnfold => "grouped_unfold",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Attention driving one adaptive layer over `T` frames.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelAttention {
    /// `[T, K]`
    pub weights: Tensor,
    /// `[T, K_t * K_f]`
    pub spatial: Option<Tensor>,
    /// `[T, C_in]`
    pub chan_in: Option<Tensor>,
    /// `[T, C_out]`
    pub chan_out: Option<Tensor>,
}

fn row(t: &Option<Tensor>, i: usize) -> Option<&[f32]> {
    t.as_ref().map(|m| {
        let w = m.dim(1);
        &m.data()[i * w..(i + 1) * w]
    })
}

impl KernelAttention {
    pub fn new(weights: Tensor) -> Self {
        Self {
            weights,
            spatial: None,
            chan_in: None,
            chan_out: None,
        }
    }

    pub fn frames(&self) -> usize {
        self.weights.dim(0)
    }

    fn weights_at(&self, t: usize) -> &[f32] {
        let k = self.weights.dim(1);
        &self.weights.data()[t * k..(t + 1) * k]
    }

    fn maps_at(&self, t: usize) -> KernelMaps<'_> {
        KernelMaps {
            spatial: row(&self.spatial, t),
            chan_in: row(&self.chan_in, t),
            chan_out: row(&self.chan_out, t),
        }
    }

    fn validate(&self, bank: &KernelBank, t_len: usize) -> Result<()> {
        self.weights
            .expect_shape("kernel attention", &[t_len, bank.kernels()])?;
        let checks = [
            ("spatial attention", &self.spatial, bank.spec().taps()),
            ("input channel attention", &self.chan_in, bank.c_in()),
            ("output channel attention", &self.chan_out, bank.c_out()),
        ];
        for (name, map, width) in checks {
            if let Some(m) = map {
                m.expect_shape(name, &[t_len, width])?;
            }
        }
        Ok(())
    }
}

/// Aggregates the kernel for one frame and convolves output frame `t`.
///
/// Streaming callers pass a ring of the last `K_t` frames with `t = K_t - 1`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_step(
    bank: &KernelBank,
    input: &[f32],
    t_len: usize,
    f_in: usize,
    t: usize,
    a: &[f32],
    maps: &KernelMaps,
    kernel_buf: &mut [f32],
    f_out: usize,
    out: &mut [f32],
) {
    aggregate_into(bank, a, maps, kernel_buf);
    convolve_frame(bank, input, t_len, f_in, t, kernel_buf, Some(bank.bias().data()), f_out, out);
}

#[allow(clippy::too_many_arguments)]
fn convolve_frame(
    bank: &KernelBank,
    input: &[f32],
    t_len: usize,
    f_in: usize,
    t: usize,
    kernel: &[f32],
    bias: Option<&[f32]>,
    f_out: usize,
    out: &mut [f32],
) {
    if bank.is_transposed() {
        conv_transpose_frame(input, bank.c_in(), t_len, f_in, t, kernel, bias, bank.spec(), f_out, out);
    } else {
        conv_frame(
            input,
            bank.c_in(),
            t_len,
            f_in,
            t,
            kernel,
            bias,
            bank.c_out(),
            bank.spec(),
            f_out,
            out,
        );
    }
}

/// Adaptive convolution `[C_in, T, F]` → `[C_out, T, F_out]`.
pub fn adaptive_conv_forward(
    input: &Tensor,
    bank: &KernelBank,
    attn: &KernelAttention,
    strategy: Strategy,
) -> Result<Tensor> {
    input.expect_rank("adaptive conv input", 3)?;
    let (c_in, t_len, f_in) = (input.dim(0), input.dim(1), input.dim(2));
    if c_in != bank.c_in() {
        return config_err(format!("bank expects {} input channels, got {c_in}", bank.c_in()));
    }
    attn.validate(bank, t_len)?;
    let f_out = bank.out_freq(f_in)?;
    match strategy {
        Strategy::PerFrame => per_frame(input, bank, attn, f_out),
        Strategy::OutputAgg => output_agg(input, bank, attn, f_out),
        Strategy::GroupedUnfold => grouped_unfold(input, bank, attn, f_out),
    }
}

fn per_frame(input: &Tensor, bank: &KernelBank, attn: &KernelAttention, f_out: usize) -> Result<Tensor> {
    let (t_len, f_in) = (input.dim(1), input.dim(2));
    let c_out = bank.c_out();
    let mut out = Tensor::zeros(&[c_out, t_len, f_out]);
    let mut kernel = vec![0.0; bank.kernel_len()];
    let mut frame = vec![0.0; c_out * f_out];
    for t in 0..t_len {
        conv_step(
            bank,
            input.data(),
            t_len,
            f_in,
            t,
            attn.weights_at(t),
            &attn.maps_at(t),
            &mut kernel,
            f_out,
            &mut frame,
        );
        out.write_frame(t, &frame);
    }
    Ok(out)
}

/// `Z(t) = A^f(t) ⊙ Σ_k A_k(t) Z_k(t) + b` with `Z_k` the bias-free static outputs.
fn output_agg(input: &Tensor, bank: &KernelBank, attn: &KernelAttention, f_out: usize) -> Result<Tensor> {
    if attn.spatial.is_some() || attn.chan_in.is_some() {
        return config_err("output aggregation supports only kernel weights and output channel maps");
    }
    let (t_len, f_in) = (input.dim(1), input.dim(2));
    let c_out = bank.c_out();
    let plane = c_out * f_out;
    let mut outputs = vec![0.0f32; bank.kernels() * t_len * plane];
    for k in 0..bank.kernels() {
        for t in 0..t_len {
            let dst = &mut outputs[(k * t_len + t) * plane..][..plane];
            convolve_frame(bank, input.data(), t_len, f_in, t, bank.candidate(k), None, f_out, dst);
        }
    }
    let mut out = Tensor::zeros(&[c_out, t_len, f_out]);
    let mut frame = vec![0.0; plane];
    let bias = bank.bias().data();
    for t in 0..t_len {
        let a = attn.weights_at(t);
        let z0 = &outputs[t * plane..][..plane];
        for (f, z) in frame.iter_mut().zip(z0) {
            *f = a[0] * z;
        }
        for (k, ak) in a.iter().enumerate().skip(1) {
            let zk = &outputs[(k * t_len + t) * plane..][..plane];
            for (f, z) in frame.iter_mut().zip(zk) {
                *f += ak * z;
            }
        }
        let fmap = row(&attn.chan_out, t);
        for o in 0..c_out {
            let scale = fmap.map_or(1.0, |m| m[o]);
            for v in &mut frame[o * f_out..(o + 1) * f_out] {
                *v = *v * scale + bias[o];
            }
        }
        out.write_frame(t, &frame);
    }
    Ok(out)
}

/// Folds time into channel groups so that one grouped convolution computes all frames.
fn grouped_unfold(input: &Tensor, bank: &KernelBank, attn: &KernelAttention, f_out: usize) -> Result<Tensor> {
    let (c_in, t_len, f_in) = (input.dim(0), input.dim(1), input.dim(2));
    let c_out = bank.c_out();
    let spec = *bank.spec();
    let kt = spec.kernel_t;
    let d = bank.kernel_len();

    // Unfolded input [T * C_in, K_t, F]: channel t * C_in + c holds frames t-K_t+1 ..= t.
    let mut unfolded = vec![0.0f32; t_len * c_in * kt * f_in];
    for t in 0..t_len {
        for c in 0..c_in {
            for j in 0..kt {
                let ti = t as isize - (kt - 1) as isize + j as isize;
                if ti < 0 {
                    continue;
                }
                let src = &input.data()[(c * t_len + ti as usize) * f_in..][..f_in];
                unfolded[((t * c_in + c) * kt + j) * f_in..][..f_in].copy_from_slice(src);
            }
        }
    }
    let mut stacked = vec![0.0f32; t_len * d];
    let mut bias = vec![0.0f32; t_len * c_out];
    for t in 0..t_len {
        check_maps(bank, &attn.maps_at(t))?;
        aggregate_into(bank, attn.weights_at(t), &attn.maps_at(t), &mut stacked[t * d..(t + 1) * d]);
        bias[t * c_out..(t + 1) * c_out].copy_from_slice(bank.bias().data());
    }

    let mut flat = vec![0.0f32; t_len * c_out * f_out];
    if bank.is_transposed() {
        let merged = ConvSpec {
            groups: t_len * c_in,
            ..spec
        };
        conv_transpose_frame(&unfolded, t_len * c_in, 1, f_in, 0, &stacked, Some(&bias), &merged, f_out, &mut flat);
    } else {
        let merged = ConvSpec {
            groups: t_len * spec.groups,
            ..spec
        };
        conv_frame(
            &unfolded,
            t_len * c_in,
            kt,
            f_in,
            kt - 1,
            &stacked,
            Some(&bias),
            t_len * c_out,
            &merged,
            f_out,
            &mut flat,
        );
    }
    let mut out = Tensor::zeros(&[c_out, t_len, f_out]);
    for t in 0..t_len {
        out.write_frame(t, &flat[t * c_out * f_out..(t + 1) * c_out * f_out]);
    }
    Ok(out)
}

/// Utterance-level dynamic convolution: one kernel mixed by `a` for every frame.
pub fn global_dynconv_forward(input: &Tensor, bank: &KernelBank, a: &[f32]) -> Result<Tensor> {
    input.expect_rank("dynamic conv input", 3)?;
    let (c_in, t_len, f_in) = (input.dim(0), input.dim(1), input.dim(2));
    if c_in != bank.c_in() {
        return config_err(format!("bank expects {} input channels, got {c_in}", bank.c_in()));
    }
    if a.len() != bank.kernels() {
        return config_err(format!("{} weights for {} candidates", a.len(), bank.kernels()));
    }
    let f_out = bank.out_freq(f_in)?;
    let mut kernel = vec![0.0; bank.kernel_len()];
    aggregate_into(bank, a, &KernelMaps::default(), &mut kernel);
    let mut out = Tensor::zeros(&[bank.c_out(), t_len, f_out]);
    let mut frame = vec![0.0; bank.c_out() * f_out];
    for t in 0..t_len {
        convolve_frame(bank, input.data(), t_len, f_in, t, &kernel, Some(bank.bias().data()), f_out, &mut frame);
        out.write_frame(t, &frame);
    }
    Ok(out)
}

/// The last `len` frames of a `[C, F]` stream laid out as `[C, len, F]`, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct FrameRing {
    channels: usize,
    len: usize,
    freq: usize,
    data: Vec<f32>,
}

impl FrameRing {
    pub(crate) fn new(channels: usize, len: usize, freq: usize) -> Self {
        Self {
            channels,
            len,
            freq,
            data: vec![0.0; channels * len * freq],
        }
    }

    pub(crate) fn push(&mut self, frame: &[f32]) {
        let (l, f) = (self.len, self.freq);
        for c in 0..self.channels {
            let block = &mut self.data[c * l * f..(c + 1) * l * f];
            block.copy_within(f.., 0);
            block[(l - 1) * f..].copy_from_slice(&frame[c * f..(c + 1) * f]);
        }
    }

    pub(crate) fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn reset(&mut self) {
        self.data.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_simplex;
    use crate::tensor::{conv2d, conv2d_transpose_freq};
    use crate::testutil::{rand_tensor, rng};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig, prop};

    fn rand_bank(seed: u64, k: usize, c_in: usize, c_out: usize, spec: ConvSpec) -> KernelBank {
        let mut r = rng(seed);
        KernelBank::new(
            rand_tensor(&mut r, &[k, c_out, c_in / spec.groups, spec.kernel_t, spec.kernel_f], 0.5),
            rand_tensor(&mut r, &[c_out], 0.5),
            spec,
        )
        .unwrap()
    }

    fn rand_attention(seed: u64, t: usize, k: usize) -> KernelAttention {
        let mut r = rng(seed);
        let mut w = Vec::new();
        for _ in 0..t {
            w.extend(random_simplex(&mut r, k));
        }
        KernelAttention::new(Tensor::new(vec![t, k], w).unwrap())
    }

    fn rel_err(a: &Tensor, b: &Tensor) -> f32 {
        a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(1e-12)
    }

    #[test]
    fn single_candidate_is_bitwise_static() {
        let spec = ConvSpec::new(3, 3, 2, 2);
        let bank = rand_bank(1, 1, 4, 6, spec);
        let mut r = rng(2);
        let x = rand_tensor(&mut r, &[4, 7, 17], 1.0);
        let attn = KernelAttention::new(Tensor::full(&[7, 1], 1.0));
        let kernel = bank.candidates().clone().reshape(&[6, 2, 3, 3]).unwrap();
        let reference = conv2d(&x, &kernel, bank.bias(), &spec).unwrap();
        assert_eq!(adaptive_conv_forward(&x, &bank, &attn, Strategy::PerFrame).unwrap(), reference);
        for s in [Strategy::OutputAgg, Strategy::GroupedUnfold] {
            let y = adaptive_conv_forward(&x, &bank, &attn, s).unwrap();
            assert!(rel_err(&y, &reference) < 1e-6);
        }
    }

    #[test]
    fn alternating_one_hot_splices_static_runs() {
        let spec = ConvSpec::new(2, 3, 1, 1);
        let bank = rand_bank(3, 2, 3, 2, spec);
        let mut r = rng(4);
        let x = rand_tensor(&mut r, &[3, 6, 8], 1.0);
        let w: Vec<f32> = (0..6).flat_map(|t| if t % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
        let attn = KernelAttention::new(Tensor::new(vec![6, 2], w).unwrap());
        let statics: Vec<Tensor> = (0..2)
            .map(|k| {
                let kern = Tensor::new(vec![2, 3, 2, 3], bank.candidate(k).to_vec()).unwrap();
                conv2d(&x, &kern, bank.bias(), &spec).unwrap()
            })
            .collect();
        for s in Strategy::ALL {
            let y = adaptive_conv_forward(&x, &bank, &attn, s).unwrap();
            for c in 0..2 {
                for t in 0..6 {
                    for f in 0..8 {
                        let i = (c * 6 + t) * 8 + f;
                        assert!((y.data()[i] - statics[t % 2].data()[i]).abs() < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn transposed_strategies_agree_with_static_transpose() {
        let spec = ConvSpec::new(1, 5, 2, 4);
        let mut r = rng(5);
        let bank = KernelBank::new_transposed(
            rand_tensor(&mut r, &[3, 4, 1, 1, 5], 0.5),
            rand_tensor(&mut r, &[4], 0.5),
            spec,
        )
        .unwrap();
        let x = rand_tensor(&mut r, &[4, 5, 33], 1.0);
        let attn = rand_attention(6, 5, 3);
        let ys: Vec<Tensor> = Strategy::ALL
            .iter()
            .map(|&s| adaptive_conv_forward(&x, &bank, &attn, s).unwrap())
            .collect();
        assert_eq!(ys[0].shape(), &[4, 5, 65]);
        assert!(rel_err(&ys[0], &ys[1]) < 1e-5);
        assert!(rel_err(&ys[0], &ys[2]) < 1e-5);

        let one = KernelBank::from_static(
            Tensor::new(vec![4, 1, 1, 5], bank.candidate(0).to_vec()).unwrap(),
            bank.bias().clone(),
            spec,
            true,
        )
        .unwrap();
        let y = adaptive_conv_forward(&x, &one, &KernelAttention::new(Tensor::full(&[5, 1], 1.0)), Strategy::PerFrame)
            .unwrap();
        let kern = Tensor::new(vec![4, 1, 1, 5], bank.candidate(0).to_vec()).unwrap();
        assert_eq!(y, conv2d_transpose_freq(&x, &kern, bank.bias(), &spec).unwrap());
    }

    #[test]
    fn output_agg_rejects_input_side_maps() {
        let spec = ConvSpec::new(1, 3, 1, 1);
        let bank = rand_bank(7, 2, 2, 2, spec);
        let mut attn = rand_attention(8, 3, 2);
        attn.spatial = Some(Tensor::full(&[3, 3], 0.5));
        let x = Tensor::zeros(&[2, 3, 5]);
        assert!(adaptive_conv_forward(&x, &bank, &attn, Strategy::OutputAgg).is_err());
        assert!(adaptive_conv_forward(&x, &bank, &attn, Strategy::GroupedUnfold).is_ok());
        assert!("bogus".parse::<Strategy>().is_err());
        assert_eq!("grouped_unfold".parse::<Strategy>().unwrap(), Strategy::GroupedUnfold);
    }

    #[test]
    fn global_dynconv_matches_constant_per_frame_and_two_step_oracle() {
        let spec = ConvSpec::new(3, 3, 1, 2);
        let bank = rand_bank(9, 4, 4, 4, spec);
        let mut r = rng(10);
        let x = rand_tensor(&mut r, &[4, 6, 9], 1.0);
        let a = random_simplex(&mut r, 4);
        let g = global_dynconv_forward(&x, &bank, &a).unwrap();
        let rows: Vec<f32> = (0..6).flat_map(|_| a.clone()).collect();
        let attn = KernelAttention::new(Tensor::new(vec![6, 4], rows).unwrap());
        assert_eq!(g, adaptive_conv_forward(&x, &bank, &attn, Strategy::PerFrame).unwrap());

        let w = super::super::aggregate_kernel(&bank, &a, &KernelMaps::default()).unwrap();
        let oracle = conv2d(&x, &w, bank.bias(), &spec).unwrap();
        assert!(rel_err(&g, &oracle) < 1e-6);

        let one = rand_bank(11, 1, 4, 4, spec);
        let kern = one.candidates().clone().reshape(&[4, 2, 3, 3]).unwrap();
        assert_eq!(
            global_dynconv_forward(&x, &one, &[1.0]).unwrap(),
            conv2d(&x, &kern, one.bias(), &spec).unwrap()
        );
    }

    #[test]
    fn ring_feeds_streaming_steps() {
        let spec = ConvSpec::new(3, 3, 2, 1);
        let bank = rand_bank(12, 3, 2, 3, spec);
        let mut r = rng(13);
        let x = rand_tensor(&mut r, &[2, 5, 9], 1.0);
        let attn = rand_attention(14, 5, 3);
        let offline = adaptive_conv_forward(&x, &bank, &attn, Strategy::PerFrame).unwrap();
        let f_out = 5;
        let mut ring = FrameRing::new(2, 3, 9);
        let mut kernel = vec![0.0; bank.kernel_len()];
        let mut frame_in = vec![0.0; 18];
        let mut frame_out = vec![0.0; 15];
        for t in 0..5 {
            x.read_frame(t, &mut frame_in);
            ring.push(&frame_in);
            conv_step(
                &bank,
                ring.data(),
                ring.len(),
                9,
                ring.len() - 1,
                attn.weights_at(t),
                &KernelMaps::default(),
                &mut kernel,
                f_out,
                &mut frame_out,
            );
            let mut expected = vec![0.0; 15];
            offline.read_frame(t, &mut expected);
            assert_eq!(frame_out, expected);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn strategies_agree(
            seed in 0u64..10_000,
            k in 1usize..=8,
            cg in 1usize..=4,
            groups in 1usize..=2,
            t in 1usize..=12,
            f in 5usize..=33,
            kt in 1usize..=3,
            kf in prop::sample::select(vec![1usize, 3, 5]),
            stride in 1usize..=2,
        ) {
            let c = cg * groups;
            let spec = ConvSpec::new(kt, kf, stride, groups);
            let bank = rand_bank(seed, k, c, c, spec);
            let mut r = rng(seed ^ 0x5eed);
            let x = rand_tensor(&mut r, &[c, t, f], 1.0);
            let mut attn = rand_attention(seed + 1, t, k);
            attn.chan_out = Some(rand_tensor(&mut r, &[t, c], 1.0).map(|v| v.abs()));
            let ys: Vec<Tensor> = Strategy::ALL
                .iter()
                .map(|&s| adaptive_conv_forward(&x, &bank, &attn, s).unwrap())
                .collect();
            prop_assert!(rel_err(&ys[0], &ys[1]) < 1e-4);
            prop_assert!(rel_err(&ys[0], &ys[2]) < 1e-4);
            prop_assert!(rel_err(&ys[1], &ys[2]) < 1e-4);
        }

        #[test]
        fn future_frames_never_leak(seed in 0u64..10_000, cut in 0usize..7) {
            let spec = ConvSpec::new(3, 3, 1, 1);
            let bank = rand_bank(seed, 4, 3, 3, spec);
            let mut r = rng(seed + 7);
            let x = rand_tensor(&mut r, &[3, 8, 7], 1.0);
            let attn = rand_attention(seed + 2, 8, 4);
            let mut x2 = x.clone();
            for c in 0..3 {
                for tt in cut + 1..8 {
                    for f in 0..7 {
                        x2.data_mut()[(c * 8 + tt) * 7 + f] = 9.0;
                    }
                }
            }
            for s in Strategy::ALL {
                let a = adaptive_conv_forward(&x, &bank, &attn, s).unwrap();
                let b = adaptive_conv_forward(&x2, &bank, &attn, s).unwrap();
                for c in 0..3 {
                    let lo = c * 8 * 7;
                    prop_assert_eq!(&a.data()[lo..lo + (cut + 1) * 7], &b.data()[lo..lo + (cut + 1) * 7]);
                }
            }
        }
    }
}
