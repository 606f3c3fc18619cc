//! The complete network: feature extraction, encoder, grouped DPRNN bottleneck,
//! decoder with additive skips and the ERB-domain magnitude mask.

mod config;
mod stream;

use std::collections::HashSet;

pub use config::{default_decoder, default_encoder, Layout, ModelConfig, Shape2};
pub use stream::StreamSession;

use crate::adaptive::AttentionOutputs;
use crate::blocks::{Block, GroupedDprnn};
use crate::error::{Error, Result};
use crate::spectral::{apply_mask, compress, decompress_mask, istft, sfe, stft, ErbBank, HOP_SIZE, NUM_BINS};
use crate::tensor::Tensor;
use crate::weights::{Init, ParamSpec, WeightStore};

pub const MASK_ALPHA: &str = "mask.alpha";

/// Every parameter of the network described by `cfg`, in file order.
pub fn param_manifest(cfg: &ModelConfig) -> Result<Vec<ParamSpec>> {
    let layout = cfg.layout()?;
    let opts = cfg.block_options();
    let mut v = Vec::new();
    for (i, spec) in cfg.encoder.iter().enumerate() {
        v.extend(Block::manifest(&format!("enc{i}"), spec, layout.encoder[i].1, &opts)?);
    }
    let (c, f) = layout.bottleneck;
    for i in 0..cfg.dprnn_count {
        v.extend(GroupedDprnn::manifest(&format!("dprnn{i}"), &cfg.dprnn, c, f)?);
    }
    for (i, spec) in cfg.decoder.iter().enumerate() {
        v.extend(Block::manifest(&format!("dec{i}"), spec, layout.decoder[i].1, &opts)?);
    }
    v.push(ParamSpec::new(MASK_ALPHA, &[NUM_BINS], Init::Ones));
    Ok(v)
}

/// Result of an offline pass with per-layer attention capture.
#[derive(Clone, Debug)]
pub struct OfflineRun {
    pub output: Vec<f32>,
    /// `(layer name, attention)` for every adaptive layer, encoder first.
    pub attention: Vec<(String, AttentionOutputs)>,
    /// Frames processed.
    pub frames: usize,
}

/// Immutable, validated network. Shareable across threads; streaming state
/// lives in [`StreamSession`].
#[derive(Clone, Debug)]
pub struct Model {
    cfg: ModelConfig,
    layout: Layout,
    encoder: Vec<Block>,
    dprnn: Vec<GroupedDprnn>,
    decoder: Vec<Block>,
    alpha: Tensor,
    bank: ErbBank,
}

impl Model {
    /// Validates `store` against the manifest of `cfg` (names, shapes, and no
    /// extra tensors) and assembles the network.
    pub fn build(cfg: &ModelConfig, store: &WeightStore) -> Result<Self> {
        let layout = cfg.layout()?;
        let manifest = param_manifest(cfg)?;
        for p in &manifest {
            store.fetch(&p.name, &p.shape)?;
        }
        let known: HashSet<&str> = manifest.iter().map(|p| p.name.as_str()).collect();
        if let Some(extra) = store.names().find(|n| !known.contains(n)) {
            return Err(Error::UnexpectedTensor(extra.to_string()));
        }
        let opts = cfg.block_options();
        let encoder = cfg
            .encoder
            .iter()
            .enumerate()
            .map(|(i, s)| Block::from_store(store, &format!("enc{i}"), s, layout.encoder[i].1, &opts))
            .collect::<Result<Vec<_>>>()?;
        let (c, f) = layout.bottleneck;
        let dprnn = (0..cfg.dprnn_count)
            .map(|i| GroupedDprnn::from_store(store, &format!("dprnn{i}"), &cfg.dprnn, c, f))
            .collect::<Result<Vec<_>>>()?;
        let decoder = cfg
            .decoder
            .iter()
            .enumerate()
            .map(|(i, s)| Block::from_store(store, &format!("dec{i}"), s, layout.decoder[i].1, &opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            layout,
            encoder,
            dprnn,
            decoder,
            alpha: store.fetch(MASK_ALPHA, &[NUM_BINS])?,
            bank: ErbBank::new(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn encoder(&self) -> &[Block] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Block] {
        &self.decoder
    }

    pub fn dprnn(&self) -> &[GroupedDprnn] {
        &self.dprnn
    }

    /// Names of layers that carry kernel attention, in processing order.
    pub fn adaptive_layers(&self) -> Vec<String> {
        if !self.cfg.adaptive {
            return Vec::new();
        }
        (0..self.encoder.len())
            .map(|i| format!("enc{i}"))
            .chain((0..self.decoder.len()).map(|i| format!("dec{i}")))
            .collect()
    }

    /// Opens a hop-by-hop session. Fails for utterance-level attention.
    pub fn session(&self) -> Result<StreamSession<'_>> {
        StreamSession::new(self)
    }

    pub fn enhance(&self, wave: &[f32]) -> Result<Vec<f32>> {
        Ok(self.run_offline(wave, false)?.output)
    }

    /// Whole-utterance inference. The input is zero padded to whole hops plus
    /// one, and the output is truncated back to the input length.
    pub fn run_offline(&self, wave: &[f32], capture: bool) -> Result<OfflineRun> {
        let mut attention = Vec::new();
        if wave.is_empty() {
            return Ok(OfflineRun {
                output: Vec::new(),
                attention,
                frames: 0,
            });
        }
        let padded = pad_input(wave);
        let spec = stft(&padded);
        let frames = spec.frames();
        let feats = compress(&spec, &self.bank).stacked();
        let mut x = sfe(&feats, self.cfg.sfe_kernel)?;
        let mut skips = Vec::with_capacity(self.encoder.len());
        for (i, b) in self.encoder.iter().enumerate() {
            let (y, a) = b.forward(&x)?;
            if let (true, Some(a)) = (capture, a) {
                attention.push((format!("enc{i}"), a));
            }
            skips.push(y.clone());
            x = y;
        }
        for d in &self.dprnn {
            x = d.forward(&x)?;
        }
        for (i, b) in self.decoder.iter().enumerate() {
            let skip = &skips[skips.len() - 1 - i];
            for (v, s) in x.data_mut().iter_mut().zip(skip.data()) {
                *v += s;
            }
            let (y, a) = b.forward(&x)?;
            if let (true, Some(a)) = (capture, a) {
                attention.push((format!("dec{i}"), a));
            }
            x = y;
        }
        let d = x.reshape(&[frames, crate::spectral::ERB_BANDS])?;
        let mask = decompress_mask(&d, &self.bank, &self.alpha, self.cfg.mask_beta)?;
        let mut out = istft(&apply_mask(&mask, &spec)?);
        out.truncate(wave.len());
        Ok(OfflineRun {
            output: out,
            attention,
            frames,
        })
    }

    /// Streams `wave` through a fresh session and realigns the result with
    /// the offline output (dropping the one-hop output delay).
    pub fn enhance_streaming(&self, wave: &[f32]) -> Result<Vec<f32>> {
        if wave.is_empty() {
            return Ok(Vec::new());
        }
        let padded = pad_input(wave);
        let mut session = self.session()?;
        let mut out = Vec::with_capacity(padded.len());
        let mut block = vec![0.0; HOP_SIZE];
        for chunk in padded.chunks(HOP_SIZE) {
            session.push_into(chunk, &mut block)?;
            out.extend_from_slice(&block);
        }
        out.drain(..HOP_SIZE);
        out.truncate(wave.len());
        Ok(out)
    }

    pub(crate) fn bank(&self) -> &ErbBank {
        &self.bank
    }

    pub(crate) fn alpha(&self) -> &[f32] {
        self.alpha.data()
    }
}

/// Zero pads to `256 * (ceil(n / 256) + 1)` samples so every input sample is
/// covered by two frames.
fn pad_input(wave: &[f32]) -> Vec<f32> {
    let hops = wave.len().div_ceil(HOP_SIZE) + 1;
    let mut padded = wave.to_vec();
    padded.resize(hops * HOP_SIZE, 0.0);
    padded
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::init_random;

    fn noise(n: usize, seed: u64) -> Vec<f32> {
        use rand::Rng;
        let mut r = crate::random::seeded_rng(seed);
        (0..n).map(|_| r.gen_range(-0.3..0.3)).collect()
    }

    #[test]
    fn manifest_names_are_unique_and_ordered() {
        let m = param_manifest(&ModelConfig::default()).unwrap();
        let names: HashSet<_> = m.iter().map(|p| &p.name).collect();
        assert_eq!(names.len(), m.len());
        assert!(m[0].name.starts_with("enc0."));
        assert_eq!(m.last().unwrap().name, MASK_ALPHA);
    }

    #[test]
    fn build_rejects_missing_extra_and_misshapen() {
        let cfg = ModelConfig::default();
        let store = init_random(&cfg, 1).unwrap();
        assert!(Model::build(&cfg, &store).is_ok());

        let mut s = store.clone();
        s.remove("dec2.pw1.bias");
        assert!(matches!(Model::build(&cfg, &s), Err(Error::MissingTensor(n)) if n == "dec2.pw1.bias"));

        let mut s = store.clone();
        s.insert("extra", Tensor::zeros(&[1])).unwrap();
        assert!(matches!(Model::build(&cfg, &s), Err(Error::UnexpectedTensor(_))));

        let mut s = store.clone();
        s.remove("mask.alpha");
        s.insert("mask.alpha", Tensor::zeros(&[256])).unwrap();
        assert!(matches!(Model::build(&cfg, &s), Err(Error::ShapeMismatch { .. })));

        let small = ModelConfig::no_adaptive();
        assert!(Model::build(&small, &store).is_err());
        assert!(Model::build(&small, &init_random(&small, 1).unwrap()).is_ok());
    }

    #[test]
    fn output_length_and_finiteness() {
        let cfg = ModelConfig::no_adaptive();
        let model = Model::build(&cfg, &init_random(&cfg, 3).unwrap()).unwrap();
        for n in [0, 1, 255, 256, 257, 1000] {
            let y = model.enhance(&noise(n, n as u64)).unwrap();
            assert_eq!(y.len(), n);
            assert!(y.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn capture_lists_every_adaptive_layer() {
        let cfg = ModelConfig::default();
        let model = Model::build(&cfg, &init_random(&cfg, 4).unwrap()).unwrap();
        let run = model.run_offline(&noise(2000, 5), true).unwrap();
        let names: Vec<_> = run.attention.iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(names, model.adaptive_layers());
        assert_eq!(run.attention[0].1.kernel.shape(), &[3, run.frames, 8]);
    }
}
