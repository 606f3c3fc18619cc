use serde::Serialize;

use crate::adaptive::{AttentionMode, Normalization};
use crate::blocks::{BlockSpec, DprnnSpec};
use crate::error::Result;
use crate::model::ModelConfig;
use crate::spectral::{ERB_BANDS, FRAMES_PER_SECOND, NUM_BINS};

/// Dense ERB products per frame: compression of magnitude, real and imaginary
/// planes plus the mask expansion.
pub const ERB_MACS_PER_FRAME: u64 = 4 * (ERB_BANDS * NUM_BINS) as u64;

pub fn conv_params(kernels: usize, c_out: usize, c_in_per_group: usize, kt: usize, kf: usize) -> u64 {
    (kernels * c_out * c_in_per_group * kt * kf + c_out) as u64
}

/// MACs of one output frame with `f_out` bands.
pub fn conv_macs(c_out: usize, c_in_per_group: usize, kt: usize, kf: usize, f_out: usize) -> u64 {
    (c_out * c_in_per_group * kt * kf * f_out) as u64
}

/// Mixing `kernels` candidates of `kernel_len` reals into one kernel.
pub fn aggregation_macs(kernels: usize, kernel_len: usize) -> u64 {
    (kernels * kernel_len) as u64
}

pub fn affine_params(d_in: usize, d_out: usize) -> u64 {
    (d_out * d_in + d_out) as u64
}

pub fn gru_params(d_in: usize, hidden: usize) -> u64 {
    (3 * (hidden * d_in + hidden * hidden + 2 * hidden)) as u64
}

/// One recurrence step.
pub fn gru_macs(d_in: usize, hidden: usize) -> u64 {
    (3 * (hidden * d_in + hidden * hidden)) as u64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountRow {
    pub name: String,
    pub params: u64,
    pub macs_per_frame: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub rows: Vec<CountRow>,
    pub total_params: u64,
    pub total_macs_per_frame: u64,
    pub macs_per_second: f64,
}

impl CountReport {
    fn from_rows(rows: Vec<CountRow>) -> Self {
        let total_params = rows.iter().map(|r| r.params).sum();
        let total_macs_per_frame = rows.iter().map(|r| r.macs_per_frame).sum();
        Self {
            rows,
            total_params,
            total_macs_per_frame,
            macs_per_second: total_macs_per_frame as f64 * FRAMES_PER_SECOND,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table with a totals line.
    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:>10} {:>14}\n", "layer", "params", "MACs/frame");
        for r in &self.rows {
            s += &format!("{:<10} {:>10} {:>14}\n", r.name, r.params, r.macs_per_frame);
        }
        s += &format!("{:<10} {:>10} {:>14}\n", "total", self.total_params, self.total_macs_per_frame);
        s += &format!(
            "params {:.2}K, MACs {:.2}M per second\n",
            self.total_params as f64 / 1e3,
            self.macs_per_second / 1e6
        );
        s
    }
}

fn block_row(name: String, b: &BlockSpec, f_in: usize, cfg: &ModelConfig) -> Result<CountRow> {
    let f_out = b.out_freq(f_in)?;
    let [kt, kf] = b.kernel;
    let k = if cfg.adaptive { cfg.num_kernels } else { 1 };
    let (c_in, c_out, h) = (b.c_in, b.c_out, b.hidden);

    let mut params = (2 * c_in * f_in) as u64
        + conv_params(k, c_in, 1, kt, kf)
        + (5 * c_in) as u64
        + conv_params(k, h, c_in, 1, 1)
        + conv_params(k, c_out, h, 1, 1)
        + (5 * c_out) as u64;
    let dw_f = if b.transposed { f_in } else { f_out };
    let mut macs = conv_macs(c_in, 1, kt, kf, dw_f) + conv_macs(h, c_in, 1, 1, f_out) + conv_macs(c_out, h, 1, 1, f_out);

    if cfg.adaptive {
        let ah = cfg.attention_hidden;
        let (model_params, model_macs) = match cfg.attention_mode {
            AttentionMode::SingleFrame | AttentionMode::GlobalUtterance => {
                (affine_params(c_in, ah), (ah * c_in) as u64)
            }
            AttentionMode::MultiFrame => {
                let ck = cfg.attention_conv_kernel;
                (affine_params(c_in * ck, ah), (ah * c_in * ck) as u64)
            }
            AttentionMode::Temporal => (gru_params(c_in, ah), gru_macs(c_in, ah)),
        };
        let mut n_out = 3 * k;
        if cfg.channel_attention {
            n_out += c_in + c_out;
        }
        if cfg.spatial_attention {
            n_out += kt * kf;
        }
        params += model_params + affine_params(ah, n_out);
        if cfg.normalization == Normalization::PreluDirect {
            params += 1;
        }
        macs += (c_in * f_in) as u64
            + model_macs
            + (ah * n_out) as u64
            + aggregation_macs(k, c_in * kt * kf)
            + aggregation_macs(k, h * c_in)
            + aggregation_macs(k, c_out * h);
    }
    Ok(CountRow {
        name,
        params,
        macs_per_frame: macs,
    })
}

fn dprnn_row(name: String, d: &DprnnSpec, c: usize, f: usize) -> CountRow {
    let g = d.groups;
    let cg = c / g;
    let (hi, he) = (d.intra_hidden / g, d.inter_hidden / g);
    let params = 2 * g as u64 * gru_params(cg, hi)
        + affine_params(2 * d.intra_hidden, c)
        + (2 * c * f) as u64
        + g as u64 * gru_params(cg, he)
        + affine_params(d.inter_hidden, c)
        + (2 * c * f) as u64;
    let macs = (2 * g * f) as u64 * gru_macs(cg, hi)
        + (c * 2 * d.intra_hidden * f) as u64
        + (g * f) as u64 * gru_macs(cg, he)
        + (c * d.inter_hidden * f) as u64;
    CountRow {
        name,
        params,
        macs_per_frame: macs,
    }
}

/// Per-layer parameters and MACs derived from the configuration alone.
pub fn count_report(cfg: &ModelConfig) -> Result<CountReport> {
    let layout = cfg.layout()?;
    let mut rows = vec![CountRow {
        name: "erb".into(),
        params: 0,
        macs_per_frame: ERB_MACS_PER_FRAME,
    }];
    for (i, b) in cfg.encoder.iter().enumerate() {
        rows.push(block_row(format!("enc{i}"), b, layout.encoder[i].1, cfg)?);
    }
    let (c, f) = layout.bottleneck;
    for i in 0..cfg.dprnn_count {
        rows.push(dprnn_row(format!("dprnn{i}"), &cfg.dprnn, c, f));
    }
    for (i, b) in cfg.decoder.iter().enumerate() {
        rows.push(block_row(format!("dec{i}"), b, layout.decoder[i].1, cfg)?);
    }
    rows.push(CountRow {
        name: "mask".into(),
        params: NUM_BINS as u64,
        macs_per_frame: 0,
    });
    Ok(CountReport::from_rows(rows))
}

pub fn count_params(cfg: &ModelConfig) -> Result<u64> {
    Ok(count_report(cfg)?.total_params)
}

/// MACs per frame; multiply by 62.5 for MACs per second.
pub fn count_macs(cfg: &ModelConfig) -> Result<u64> {
    Ok(count_report(cfg)?.total_macs_per_frame)
}
