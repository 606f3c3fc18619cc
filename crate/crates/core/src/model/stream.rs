use crate::blocks::{BlockState, DprnnState};
use crate::error::{Error, Result};
use crate::spectral::{compress_frame, decompress_frame, sfe_frame, StftProcessor, ERB_BANDS, FFT_SIZE, HOP_SIZE, NUM_BINS};

use super::Model;

/// Hop-by-hop inference state for one audio stream.
///
/// Each [`push`](Self::push) takes 256 new samples and returns 256 enhanced
/// samples. Output is delayed by one hop relative to the offline result: the
/// first block is silence and block `n` equals offline samples
/// `[256 (n - 1), 256 n)`.
pub struct StreamSession<'m> {
    model: &'m Model,
    stft: StftProcessor,
    window: Vec<f32>,
    pushes: usize,
    tail: Vec<f64>,
    enc: Vec<BlockState>,
    dprnn: Vec<DprnnState>,
    dec: Vec<BlockState>,
    /// Encoder outputs of the current frame, kept for the skips.
    skips: Vec<Vec<f32>>,
    re: Vec<f32>,
    im: Vec<f32>,
    feats: Vec<f32>,
    x: Vec<f32>,
    y: Vec<f32>,
    mask: Vec<f32>,
    synth: Vec<f32>,
}

impl<'m> StreamSession<'m> {
    pub fn new(model: &'m Model) -> Result<Self> {
        let enc = model.encoder.iter().map(|b| b.new_state()).collect::<Result<Vec<_>>>()?;
        let dec = model.decoder.iter().map(|b| b.new_state()).collect::<Result<Vec<_>>>()?;
        let skips = model
            .encoder
            .iter()
            .map(|b| vec![0.0; b.spec().c_out * b.f_out()])
            .collect();
        Ok(Self {
            model,
            stft: StftProcessor::new(),
            window: vec![0.0; FFT_SIZE],
            pushes: 0,
            tail: vec![0.0; HOP_SIZE],
            enc,
            dprnn: model.dprnn.iter().map(|d| d.new_state()).collect(),
            dec,
            skips,
            re: vec![0.0; NUM_BINS],
            im: vec![0.0; NUM_BINS],
            feats: vec![0.0; 3 * ERB_BANDS],
            x: Vec::new(),
            y: Vec::new(),
            mask: vec![0.0; NUM_BINS],
            synth: vec![0.0; FFT_SIZE],
        })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// Returns to the freshly opened state.
    pub fn reset(&mut self) {
        self.window.fill(0.0);
        self.tail.fill(0.0);
        self.pushes = 0;
        self.enc.iter_mut().for_each(BlockState::reset);
        self.dec.iter_mut().for_each(BlockState::reset);
        self.dprnn.iter_mut().for_each(DprnnState::reset);
    }

    /// Blocks pushed since creation or the last reset.
    pub fn pushes(&self) -> usize {
        self.pushes
    }

    pub fn push(&mut self, block: &[f32]) -> Result<Vec<f32>> {
        let mut out = vec![0.0; HOP_SIZE];
        self.push_into(block, &mut out)?;
        Ok(out)
    }

    pub fn push_into(&mut self, block: &[f32], out: &mut [f32]) -> Result<()> {
        if block.len() != HOP_SIZE || out.len() != HOP_SIZE {
            return Err(Error::Usage(format!(
                "streaming blocks must hold exactly {HOP_SIZE} samples, got {} in and {} out",
                block.len(),
                out.len()
            )));
        }
        self.window.copy_within(HOP_SIZE.., 0);
        self.window[HOP_SIZE..].copy_from_slice(block);
        self.pushes += 1;
        if self.pushes == 1 {
            out.fill(0.0);
            return Ok(());
        }
        self.process_frame()?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.tail[i] + self.synth[i] as f64) as f32;
            self.tail[i] = self.synth[HOP_SIZE + i] as f64;
        }
        Ok(())
    }

    /// Runs the network on the current 512-sample window into `self.synth`.
    fn process_frame(&mut self) -> Result<()> {
        let m = self.model;
        self.stft.analyze(&self.window, &mut self.re, &mut self.im);
        compress_frame(&self.re, &self.im, m.bank(), &mut self.feats);
        let k = m.cfg.sfe_kernel;
        self.x.resize(3 * k * ERB_BANDS, 0.0);
        sfe_frame(&self.feats, 3, ERB_BANDS, k, &mut self.x);

        for (i, b) in m.encoder.iter().enumerate() {
            b.step(&self.x, &mut self.enc[i], &mut self.skips[i])?;
            self.x.clear();
            self.x.extend_from_slice(&self.skips[i]);
        }
        for (i, d) in m.dprnn.iter().enumerate() {
            self.y.resize(self.x.len(), 0.0);
            d.step(&self.x, &mut self.dprnn[i], &mut self.y)?;
            std::mem::swap(&mut self.x, &mut self.y);
        }
        let n = self.skips.len();
        for (i, b) in m.decoder.iter().enumerate() {
            for (v, s) in self.x.iter_mut().zip(&self.skips[n - 1 - i]) {
                *v += s;
            }
            self.y.resize(b.spec().c_out * b.f_out(), 0.0);
            b.step(&self.x, &mut self.dec[i], &mut self.y)?;
            std::mem::swap(&mut self.x, &mut self.y);
        }
        decompress_frame(&self.x, m.bank(), m.alpha(), m.cfg.mask_beta, &mut self.mask);
        for ((r, i), g) in self.re.iter_mut().zip(self.im.iter_mut()).zip(&self.mask) {
            *r *= g;
            *i *= g;
        }
        self.stft.synthesize(&self.re, &self.im, &mut self.synth);
        Ok(())
    }
}
