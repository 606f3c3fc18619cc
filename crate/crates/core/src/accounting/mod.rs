//! Closed-form parameter and MAC accounting, SI-SNR and the training loss,
//! and dominant-kernel analysis of captured attention.

mod counts;
mod metrics;
mod trace;

pub use counts::{
    affine_params, aggregation_macs, conv_macs, conv_params, count_macs, count_params, count_report, gru_macs,
    gru_params, CountReport, CountRow, ERB_MACS_PER_FRAME,
};
pub use metrics::{loss_total, si_snr, LossComponents, LossWeights, SI_SNR_CAP_DB, SI_SNR_FLOOR_DB};
pub use trace::{attention_trace, AttentionTrace, ClassSummary, SubLayerTrace, VAD_FLOOR_DB, VAD_RANGE_DB};
