//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::time::{Duration, Instant};

use adaptcrn::accounting::{attention_trace, count_params};
use adaptcrn::adaptive::{AttentionMode, Normalization, Strategy};
use adaptcrn::blocks::{DprnnSpec, PwActivation};
use adaptcrn::random::seeded_rng;
use adaptcrn::spectral::write_wav;
use adaptcrn::verify::{causality, reparameterization, stft_round_trip, strategy_equivalence, streaming_offline};
use adaptcrn::weights::init_random;
use adaptcrn::{Model, ModelConfig};
use rand::Rng;

const SEED: u64 = 2025;

struct Outcome {
    passed: bool,
    detail: String,
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["adaptcrn"];
    full.extend_from_slice(args);
    let code = adaptcrn_cli::run(full, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

fn counts() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for (variant, params, macs) in [("default", 134_510.0, 40.80e6), ("no-adaptive", 29_440.0, 33.67e6)] {
        let (code, out, err) = cli(&["count", "--variant", variant, "--json"]);
        if code != 0 {
            return Outcome {
                passed: false,
                detail: format!("count exited {code}: {err}"),
            };
        }
        let v: serde_json::Value = serde_json::from_str(&out).expect("count emits JSON");
        let p = v["total_params"].as_f64().unwrap();
        let m = v["macs_per_second"].as_f64().unwrap();
        passed &= within(p, params, 0.10) && within(m, macs, 0.15);
        parts.push(format!(
            "{variant}: {p:.0} params ({:+.1}%), {:.2}M MACs/s ({:+.1}%)",
            100.0 * (p / params - 1.0),
            m / 1e6,
            100.0 * (m / macs - 1.0)
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn from_property(r: &adaptcrn::verify::PropertyResult) -> Outcome {
    Outcome {
        passed: r.passed,
        detail: format!("{} cases, {} failures, worst {:.3e} (tol {:.0e})", r.cases, r.failures, r.worst, r.tolerance),
    }
}

fn analyze_proportions(dir: &std::path::Path) -> Outcome {
    let cfg = ModelConfig::default();
    let weights = dir.join("w.acnw");
    init_random(&cfg, SEED).unwrap().save(&weights).unwrap();
    let mut r = seeded_rng(SEED);
    // Half silence, half noise bursts, so both VAD classes are populated.
    let wave: Vec<f32> = (0..32_000)
        .map(|i| if i < 16_000 { 0.0 } else { 0.4 * r.gen_range(-1.0f32..1.0) })
        .collect();
    let input = dir.join("in.wav");
    write_wav(&input, &wave).unwrap();
    let model = Model::build(&cfg, &init_random(&cfg, SEED).unwrap()).unwrap();
    let mut worst = 0.0f64;
    let mut classes = 0;
    for layer in model.adaptive_layers() {
        let out = dir.join(format!("{layer}.json"));
        let (code, _, err) = cli(&[
            "analyze",
            "--weights",
            weights.to_str().unwrap(),
            "--input",
            input.to_str().unwrap(),
            "--layer",
            &layer,
            "--out",
            out.to_str().unwrap(),
        ]);
        if code != 0 {
            return Outcome {
                passed: false,
                detail: format!("analyze {layer} exited {code}: {err}"),
            };
        }
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        for sub in v["sub_layers"].as_array().unwrap() {
            for class in ["speech", "non_speech"] {
                if let Some(p) = sub[class]["proportions"].as_array() {
                    let s: f64 = p.iter().map(|x| x.as_f64().unwrap()).sum();
                    worst = worst.max((s - 1.0).abs());
                    classes += 1;
                }
            }
        }
    }
    // The library trace must agree with what the command wrote.
    let trace = attention_trace(&model, &wave, "enc2").unwrap();
    let both = trace.vad.iter().any(|&v| v) && trace.vad.iter().any(|&v| !v);
    Outcome {
        passed: worst <= 1e-9 && classes > 0 && both,
        detail: format!("{classes} class histograms, worst |sum - 1| = {worst:.1e}"),
    }
}

fn config_variants() -> Vec<ModelConfig> {
    let d = ModelConfig::default;
    vec![
        d(),
        ModelConfig::no_adaptive(),
        ModelConfig { attention_mode: AttentionMode::SingleFrame, ..d() },
        ModelConfig { attention_mode: AttentionMode::MultiFrame, attention_conv_kernel: 4, ..d() },
        ModelConfig { attention_mode: AttentionMode::GlobalUtterance, ..d() },
        ModelConfig { normalization: Normalization::PreluDirect, ..d() },
        ModelConfig { spatial_attention: true, channel_attention: false, ..d() },
        ModelConfig { num_kernels: 3, attention_hidden: 12, activation: PwActivation::Star, ..d() },
        ModelConfig { dprnn: DprnnSpec { groups: 4, intra_hidden: 16, inter_hidden: 32 }, ..d() },
        ModelConfig { dprnn_count: 1, strategy: Strategy::GroupedUnfold, adaptive: false, ..d() },
    ]
}

fn accounting_consistency() -> Outcome {
    let mut mismatches = Vec::new();
    let variants = config_variants();
    for (i, cfg) in variants.iter().enumerate() {
        let counted = count_params(cfg).unwrap();
        let emitted = init_random(cfg, i as u64).unwrap().total_reals() as u64;
        if counted != emitted {
            mismatches.push(format!("variant {i}: counted {counted}, emitted {emitted}"));
        }
    }
    Outcome {
        passed: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{} variants match exactly", variants.len())
        } else {
            mismatches.join("; ")
        },
    }
}

fn realtime_factor() -> Outcome {
    let cfg = ModelConfig::default();
    let model = Model::build(&cfg, &init_random(&cfg, SEED).unwrap()).unwrap();
    let mut r = seeded_rng(SEED + 9);
    let wave: Vec<f32> = (0..160_000).map(|_| 0.3 * r.gen_range(-1.0f32..1.0)).collect();
    let start = Instant::now();
    let out = model.enhance(&wave).unwrap();
    let rtf = start.elapsed().as_secs_f64() / 10.0;
    Outcome {
        passed: rtf < 0.25 && out.len() == wave.len(),
        detail: format!("real-time factor {rtf:.3} on 10 s"),
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;
    let mut criteria: Vec<(&str, Duration, Check)> = vec![
        ("1 count reproduction", Duration::from_secs(1), Box::new(counts)),
        (
            "2 strategy equivalence",
            Duration::from_secs(60),
            Box::new(|| from_property(&strategy_equivalence(SEED, 1000, None))),
        ),
        (
            "3 reparameterization identity",
            Duration::from_secs(30),
            Box::new(|| from_property(&reparameterization(SEED, 200))),
        ),
    ];
    // Criteria 4 and 7 share one inference pass per model.
    let start = Instant::now();
    let (stream, rows) = streaming_offline(SEED, 20, 2.0);
    let stream_time = start.elapsed();
    criteria.push(("4 streaming-offline equivalence", Duration::from_secs(120), Box::new(move || from_property(&stream))));
    criteria.push((
        "5 causality",
        Duration::from_secs(60),
        Box::new(|| from_property(&causality(SEED, 20, 2.0))),
    ));
    criteria.push((
        "6 stft round trip",
        Duration::from_secs(10),
        Box::new(|| {
            let (rt, pars) = stft_round_trip(SEED, 20);
            Outcome {
                passed: rt.passed && pars.passed,
                detail: format!(
                    "interior worst {:.2e} (tol 1e-6), parseval worst {:.2e} (tol 1e-4)",
                    rt.worst, pars.worst
                ),
            }
        }),
    ));
    let analyze_dir = dir.path().to_path_buf();
    criteria.push((
        "7 attention sanity",
        Duration::from_secs(120),
        Box::new(move || {
            let a = analyze_proportions(&analyze_dir);
            Outcome {
                passed: rows.passed && a.passed,
                detail: format!("row sums worst {:.1e} over {} models; {}", rows.worst, rows.cases, a.detail),
            }
        }),
    ));
    criteria.push(("8 accounting-weights consistency", Duration::from_secs(5), Box::new(accounting_consistency)));
    criteria.push(("9 performance target", Duration::from_secs(3), Box::new(realtime_factor)));

    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let mut elapsed = start.elapsed();
        if name.starts_with('4') {
            elapsed += stream_time;
        }
        let in_time = elapsed <= budget;
        let passed = outcome.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "[{}] {name}: {} [{:.2}s / {}s budget]",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
