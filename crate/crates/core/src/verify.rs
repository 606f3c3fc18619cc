//! Randomized property suites behind the CLI `verify` command.
//!
//! Every suite derives its cases from `(seed, property, case index)` only, so a
//! fixed seed reproduces the same cases on every run and platform.

use rand::Rng;
use serde::Serialize;

use crate::adaptive::{adaptive_conv_forward, reparam_pw_pair, KernelAttention, KernelBank, Normalization, Strategy};
use crate::model::{Model, ModelConfig};
use crate::random::{random_simplex, seeded_rng, uniform_tensor, SeededRng};
use crate::spectral::{istft, stft, sqrt_hann, FFT_SIZE, HOP_SIZE, NUM_BINS, SAMPLE_RATE};
use crate::tensor::{ConvSpec, Tensor};
use crate::weights::init_random;

/// Deliberate defects used to check that the suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Output aggregation silently drops the last candidate kernel.
    BreakAggregation,
}

impl std::str::FromStr for Fault {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "break-aggregation" => Ok(Self::BreakAggregation),
            other => Err(crate::Error::Usage(format!("unknown fault `{other}` (known: break-aggregation)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub property: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest error observed, in the unit of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyResult {
    fn new(property: &'static str, tolerance: f64) -> Self {
        Self {
            property,
            cases: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
            passed: true,
        }
    }

    /// Records one case; `err` must be below the tolerance (NaN fails).
    fn record(&mut self, err: f64) {
        self.cases += 1;
        if !(err < self.tolerance) {
            self.failures += 1;
            self.passed = false;
        }
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
    }

    /// Records an exact check.
    fn record_exact(&mut self, ok: bool, err: f64) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            self.passed = false;
        }
        self.worst = self.worst.max(err);
    }

    pub fn line(&self) -> String {
        format!(
            "{:<24} {:>6} cases  worst {:>10.3e}  tol {:>8.1e}  {}",
            self.property,
            self.cases,
            self.worst,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Cases per property; `None` uses each property's default.
    pub cases: Option<usize>,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            cases: None,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub results: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.property).collect()
    }

    pub fn table(&self) -> String {
        self.results.iter().map(|r| r.line() + "\n").collect()
    }
}

pub const STRATEGY_TOL: f64 = 1e-4;
pub const REPARAM_TOL: f64 = 1e-5;
pub const STREAM_TOL: f64 = 1e-5;
pub const STFT_TOL: f64 = 1e-6;
pub const PARSEVAL_TOL: f64 = 1e-4;
pub const ROW_SUM_TOL: f64 = 1e-6;

fn case_rng(seed: u64, property: u64, case: usize) -> SeededRng {
    let mut r = seeded_rng(seed ^ property.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    // Skip ahead per case so cases are independent of the case count.
    let stream = r.gen::<u64>().wrapping_add(case as u64);
    seeded_rng(stream)
}

fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    let scale = a.max_abs().max(b.max_abs()).max(1e-12) as f64;
    a.max_abs_diff(b) as f64 / scale
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).fold(0.0, f64::max)
}

fn simplex_rows(r: &mut SeededRng, t: usize, k: usize) -> Tensor {
    let data = (0..t).flat_map(|_| random_simplex(r, k)).collect();
    Tensor::new(vec![t, k], data).expect("consistent shape")
}

/// Random adaptive convolution case: returns (input, bank, attention).
fn strategy_case(r: &mut SeededRng) -> (Tensor, KernelBank, KernelAttention) {
    let k = r.gen_range(1..=8);
    let t = r.gen_range(1..=32);
    let f = r.gen_range(1..=33);
    let kf = [1, 3, 5][r.gen_range(0..3)];
    let stride = r.gen_range(1..=2);
    let transposed = r.gen_bool(0.2);
    let (c_in, c_out, groups, kt) = if transposed {
        let c = r.gen_range(1..=16);
        (c, c, c, 1)
    } else if r.gen_bool(0.5) {
        let c = r.gen_range(1..=16);
        (c, c, c, r.gen_range(1..=3))
    } else {
        (r.gen_range(1..=16), r.gen_range(1..=16), 1, r.gen_range(1..=3))
    };
    let spec = ConvSpec::new(kt, kf, stride, groups);
    let bound = 1.0 / ((c_in / groups * kt * kf) as f32).sqrt();
    let w = uniform_tensor(r, &[k, c_out, c_in / groups, kt, kf], bound);
    let b = uniform_tensor(r, &[c_out], bound);
    let bank = if transposed {
        KernelBank::new_transposed(w, b, spec)
    } else {
        KernelBank::new(w, b, spec)
    }
    .expect("valid random bank");
    let x = uniform_tensor(r, &[c_in, t, f], 1.0);
    let mut attn = KernelAttention::new(simplex_rows(r, t, k));
    if r.gen_bool(0.5) {
        attn.chan_out = Some(Tensor::from_fn(&[t, c_out], |_| r.gen_range(0.0..1.0)));
    }
    (x, bank, attn)
}

/// The three execution strategies agree pairwise (relative to the output peak).
pub fn strategy_equivalence(seed: u64, cases: usize, fault: Option<Fault>) -> PropertyResult {
    let mut res = PropertyResult::new("strategy_equivalence", STRATEGY_TOL);
    for case in 0..cases {
        let mut r = case_rng(seed, 1, case);
        let (x, bank, attn) = strategy_case(&mut r);
        let mut agg_attn = attn.clone();
        if fault == Some(Fault::BreakAggregation) {
            let k = bank.kernels();
            for row in agg_attn.weights.data_mut().chunks_mut(k) {
                row[k - 1] = 0.0;
            }
        }
        let run = |a: &KernelAttention, s| adaptive_conv_forward(&x, &bank, a, s);
        let err = match (
            run(&attn, Strategy::PerFrame),
            run(&agg_attn, Strategy::OutputAgg),
            run(&attn, Strategy::GroupedUnfold),
        ) {
            (Ok(p), Ok(o), Ok(g)) => rel_err(&p, &o).max(rel_err(&p, &g)).max(rel_err(&o, &g)),
            _ => f64::INFINITY,
        };
        res.record(err);
    }
    res
}

/// Two adaptive pointwise layers equal one layer with `K1 * K2` composed kernels.
pub fn reparameterization(seed: u64, cases: usize) -> PropertyResult {
    let mut res = PropertyResult::new("reparameterization", REPARAM_TOL);
    for case in 0..cases {
        let mut r = case_rng(seed, 2, case);
        let (c_in, hidden, c_out) = (r.gen_range(1..=16), r.gen_range(1..=16), r.gen_range(1..=16));
        let (k1, k2) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let (t, f) = (r.gen_range(1..=16), r.gen_range(1..=33));
        let pw = |r: &mut SeededRng, k: usize, ci: usize, co: usize| {
            let bound = 1.0 / (ci as f32).sqrt();
            let w = uniform_tensor(r, &[k, co, ci, 1, 1], bound);
            let b = uniform_tensor(r, &[co], bound);
            KernelBank::new(w, b, ConvSpec::pointwise()).expect("valid pointwise bank")
        };
        let first = pw(&mut r, k1, c_in, hidden);
        let second = pw(&mut r, k2, hidden, c_out);
        let x = uniform_tensor(&mut r, &[c_in, t, f], 1.0);
        let a1 = simplex_rows(&mut r, t, k1);
        let a2 = simplex_rows(&mut r, t, k2);
        let two_layer = adaptive_conv_forward(&x, &first, &KernelAttention::new(a1.clone()), Strategy::PerFrame)
            .and_then(|h| adaptive_conv_forward(&h, &second, &KernelAttention::new(a2.clone()), Strategy::PerFrame));
        let single = reparam_pw_pair(&first, &second).and_then(|p| p.forward(&x, &a1, &a2));
        let err = match (two_layer, single) {
            (Ok(a), Ok(b)) if a.shape() == b.shape() => a.max_abs_diff(&b) as f64,
            _ => f64::INFINITY,
        };
        res.record(err);
    }
    res
}

/// Model configuration used for the `case`-th random model: cycles through
/// the streamable attention modes and both normalizations.
pub fn case_config(case: usize) -> ModelConfig {
    use crate::adaptive::AttentionMode::*;
    let mode = [Temporal, SingleFrame, MultiFrame][case % 3];
    ModelConfig {
        attention_mode: mode,
        spatial_attention: case % 4 == 3,
        ..ModelConfig::default()
    }
}

fn random_audio(r: &mut SeededRng, n: usize) -> Vec<f32> {
    // Noise with a slow random envelope, so frame levels vary.
    let mut env = 0.3f32;
    (0..n)
        .map(|i| {
            if i % 1024 == 0 {
                env = r.gen_range(0.001..0.6);
            }
            env * r.gen_range(-1.0f32..1.0)
        })
        .collect()
}

/// Streaming and offline inference agree after latency alignment; also
/// checks that every captured softmax row sums to one.
pub fn streaming_offline(seed: u64, cases: usize, seconds: f64) -> (PropertyResult, PropertyResult) {
    let mut res = PropertyResult::new("streaming_offline", STREAM_TOL);
    let mut rows = PropertyResult::new("attention_row_sums", ROW_SUM_TOL);
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    for case in 0..cases {
        let mut r = case_rng(seed, 3, case);
        let cfg = case_config(case);
        let model = match init_random(&cfg, r.gen()).and_then(|w| Model::build(&cfg, &w)) {
            Ok(m) => m,
            Err(_) => {
                res.record(f64::INFINITY);
                continue;
            }
        };
        let x = random_audio(&mut r, n);
        let (off, st) = match (model.run_offline(&x, true), model.enhance_streaming(&x)) {
            (Ok(off), Ok(st)) => (off, st),
            _ => {
                res.record(f64::INFINITY);
                continue;
            }
        };
        res.record(max_abs_diff(&off.output, &st));
        if cfg.normalization == Normalization::Softmax {
            let k = cfg.num_kernels;
            let worst = off
                .attention
                .iter()
                .flat_map(|(_, a)| a.kernel.data().chunks(k).map(|row| (row.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs()))
                .fold(0.0, f64::max);
            rows.record(worst);
        }
    }
    (res, rows)
}

/// Changing the input after sample `t` leaves streamed outputs up to `t - 512` bit-identical.
pub fn causality(seed: u64, cases: usize, seconds: f64) -> PropertyResult {
    let mut res = PropertyResult::new("causality", 0.0);
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    let latency = FFT_SIZE;
    for case in 0..cases {
        let mut r = case_rng(seed, 4, case);
        let cfg = case_config(case);
        let model = match init_random(&cfg, r.gen()).and_then(|w| Model::build(&cfg, &w)) {
            Ok(m) => m,
            Err(_) => {
                res.record_exact(false, f64::INFINITY);
                continue;
            }
        };
        let x = random_audio(&mut r, n);
        let t = r.gen_range(latency + 1..n - 1);
        let mut y = x.clone();
        for v in &mut y[t + 1..] {
            *v = r.gen_range(-1.0..1.0);
        }
        match (model.enhance_streaming(&x), model.enhance_streaming(&y)) {
            (Ok(a), Ok(b)) => {
                let keep = t - latency + 1;
                let err = max_abs_diff(&a[..keep], &b[..keep]);
                res.record_exact(a[..keep] == b[..keep], err);
            }
            _ => res.record_exact(false, f64::INFINITY),
        }
    }
    res
}

/// STFT analysis/synthesis reconstructs interior samples, and each frame's
/// spectrum carries the windowed frame's energy.
pub fn stft_round_trip(seed: u64, cases: usize) -> (PropertyResult, PropertyResult) {
    let mut rt = PropertyResult::new("stft_round_trip", STFT_TOL);
    let mut pars = PropertyResult::new("stft_parseval", PARSEVAL_TOL);
    let window = sqrt_hann(FFT_SIZE);
    for case in 0..cases {
        let mut r = case_rng(seed, 5, case);
        let x: Vec<f32> = (0..SAMPLE_RATE as usize).map(|_| r.gen_range(-1.0..1.0)).collect();
        let spec = stft(&x);
        let y = istft(&spec);
        let interior = HOP_SIZE..y.len() - HOP_SIZE;
        rt.record(max_abs_diff(&x[interior.clone()], &y[interior]));

        let (mut time_e, mut freq_e) = (0.0f64, 0.0f64);
        for t in 0..spec.frames() {
            for (i, w) in window.iter().enumerate() {
                time_e += (x[t * HOP_SIZE + i] as f64 * w).powi(2);
            }
            for k in 0..NUM_BINS {
                let (re, im) = (spec.real.data()[t * NUM_BINS + k] as f64, spec.imag.data()[t * NUM_BINS + k] as f64);
                let weight = if k == 0 || k == NUM_BINS - 1 { 1.0 } else { 2.0 };
                freq_e += weight * (re * re + im * im);
            }
        }
        freq_e /= FFT_SIZE as f64;
        pars.record((time_e - freq_e).abs() / time_e.max(1e-300));
    }
    (rt, pars)
}

/// Default case counts: strategies, reparameterization, models, signals.
pub const DEFAULT_CASES: [usize; 4] = [1000, 200, 20, 20];

pub fn run_all(opts: &VerifyOptions) -> VerifyReport {
    let n = |i: usize| opts.cases.unwrap_or(DEFAULT_CASES[i]);
    let mut results = vec![
        strategy_equivalence(opts.seed, n(0), opts.fault),
        reparameterization(opts.seed, n(1)),
    ];
    let (stream, rows) = streaming_offline(opts.seed, n(2), 2.0);
    results.push(stream);
    results.push(rows);
    results.push(causality(opts.seed, n(2), 1.0));
    let (rt, pars) = stft_round_trip(opts.seed, n(3));
    results.push(rt);
    results.push(pars);
    VerifyReport { results }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let a = strategy_equivalence(7, 40, None);
        assert!(a.passed, "{}", a.line());
        assert_eq!(a, strategy_equivalence(7, 40, None));
        let b = reparameterization(7, 20);
        assert!(b.passed, "{}", b.line());
        let (rt, pars) = stft_round_trip(7, 2);
        assert!(rt.passed && pars.passed, "{} {}", rt.line(), pars.line());
    }

    #[test]
    fn injected_fault_is_caught() {
        let r = strategy_equivalence(3, 10, Some(Fault::BreakAggregation));
        assert!(!r.passed);
        assert_eq!(r.failures, 10);
    }

    #[test]
    fn models_stream_and_stay_causal() {
        let (s, rows) = streaming_offline(1, 2, 0.5);
        assert!(s.passed && rows.passed, "{} {}", s.line(), rows.line());
        let c = causality(1, 2, 0.5);
        assert!(c.passed, "{}", c.line());
    }
}
