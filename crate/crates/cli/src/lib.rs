//! Command-line front end: `enhance`, `init-weights`, `count`, `analyze`, `verify`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use adaptcrn::accounting::{attention_trace, count_report};
use adaptcrn::spectral::{read_wav, write_wav};
use adaptcrn::verify::{run_all, VerifyOptions};
use adaptcrn::weights::init_random;
use adaptcrn::{Error, Model, ModelConfig, WeightStore};
use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "adaptcrn", version, about = "Streaming speech enhancement with adaptive convolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    Default,
    NoAdaptive,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance a 16 kHz mono 16-bit WAV file.
    Enhance {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Process hop by hop instead of the whole utterance at once.
        #[arg(long)]
        streaming: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write seeded random weights for a configuration.
    InitWeights {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print parameter and MAC counts per layer.
    Count {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Variant::Default)]
        variant: Variant,
        #[arg(long)]
        json: bool,
    },
    /// Trace kernel attention of one adaptive layer; `--layer list` lists layers.
    Analyze {
        #[arg(long)]
        layer: String,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the randomized property suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cases per property (defaults differ per property).
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long)]
        json: bool,
        #[cfg(feature = "fault-injection")]
        #[arg(long, hide = true)]
        inject: Option<String>,
    },
}

/// Failure of a subcommand, carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Usage(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn load_config(path: Option<&Path>) -> Result<ModelConfig, Failure> {
    match path {
        None => Ok(ModelConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure {
                code: EXIT_DATA,
                message: format!("{}: {e}", p.display()),
            })?;
            Ok(ModelConfig::from_json(&text)?)
        }
    }
}

fn load_model(weights: &Path, config: Option<&Path>) -> Result<Model, Failure> {
    let cfg = load_config(config)?;
    let store = WeightStore::load(weights)?;
    Ok(Model::build(&cfg, &store)?)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match cli.command {
        Command::Enhance {
            weights,
            input,
            output,
            streaming,
            config,
        } => {
            let model = load_model(&weights, config.as_deref())?;
            let wave = read_wav(&input)?;
            let enhanced = if streaming {
                model.enhance_streaming(&wave)?
            } else {
                model.enhance(&wave)?
            };
            write_wav(&output, &enhanced)?;
            writeln!(out, "wrote {} samples to {}", enhanced.len(), output.display())?;
        }
        Command::InitWeights { config, seed, out: path } => {
            let cfg = load_config(config.as_deref())?;
            let store = init_random(&cfg, seed)?;
            store.save(&path)?;
            writeln!(
                out,
                "wrote {} tensors ({} reals) to {}",
                store.len(),
                store.total_reals(),
                path.display()
            )?;
        }
        Command::Count { config, variant, json } => {
            let mut cfg = load_config(config.as_deref())?;
            if variant == Variant::NoAdaptive {
                cfg.adaptive = false;
            }
            let report = count_report(&cfg)?;
            if json {
                writeln!(out, "{}", report.to_json())?;
            } else {
                write!(out, "{}", report.table())?;
            }
        }
        Command::Analyze {
            layer,
            weights,
            input,
            out: path,
            config,
        } => {
            if layer == "list" {
                let model = match &weights {
                    Some(w) => load_model(w, config.as_deref())?,
                    None => {
                        let cfg = load_config(config.as_deref())?;
                        Model::build(&cfg, &init_random(&cfg, 0)?)?
                    }
                };
                for name in model.adaptive_layers() {
                    writeln!(out, "{name}")?;
                }
                return Ok(EXIT_OK);
            }
            let (Some(weights), Some(input), Some(path)) = (weights, input, path) else {
                return Err(usage("analyze needs --weights, --input and --out unless --layer list"));
            };
            let model = load_model(&weights, config.as_deref())?;
            let wave = read_wav(&input)?;
            let trace = attention_trace(&model, &wave, &layer)?;
            let json = serde_json::to_string_pretty(&trace).map_err(Error::from)?;
            std::fs::write(&path, json)?;
            let speech = trace.vad.iter().filter(|&&v| v).count();
            writeln!(
                out,
                "{}: {} frames ({speech} speech), trace written to {}",
                trace.layer,
                trace.frames,
                path.display()
            )?;
        }
        Command::Verify {
            seed,
            cases,
            json,
            #[cfg(feature = "fault-injection")]
            inject,
        } => {
            #[allow(unused_mut)]
            let mut opts = VerifyOptions {
                seed,
                cases,
                fault: None,
            };
            #[cfg(feature = "fault-injection")]
            if let Some(f) = inject {
                opts.fault = Some(f.parse()?);
            }
            let report = run_all(&opts);
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
            } else {
                write!(out, "{}", report.table())?;
            }
            if !report.passed() {
                return Err(Failure {
                    code: EXIT_VERIFY,
                    message: format!("failed properties: {}", report.failed().join(", ")),
                });
            }
        }
    }
    Ok(EXIT_OK)
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
