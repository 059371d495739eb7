use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semstream::codec::CodecConfig;
use semstream::harness::{cmd_ablate, cmd_bench, cmd_decode, cmd_encode, cmd_stream, AblateConfig, EncodeConfig, Input};
use semstream::netem::LinkTrace;
use semstream::residual::{DEFAULT_QUANT_STEP, DEFAULT_THETA};
use semstream::session::SessionConfig;
use semstream::synth::{Content, VideoSource};
use semstream::video::VideoFormat;
use semstream::{Error, Result};

/// Semantic token video codec and emulated streaming harness.
///
/// Log verbosity follows SEMSTREAM_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "semstream", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode a video into a token stream file.
    Encode {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f32,
        #[arg(long, default_value_t = DEFAULT_QUANT_STEP)]
        quant_step: f32,
        /// Tokens only.
        #[arg(long)]
        no_residual: bool,
    },
    /// Decode a token stream file, optionally to y4m and against a reference.
    Decode {
        stream: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Reference video for PSNR, given with the usual input flags.
        #[command(flatten)]
        reference: InputArgs,
    },
    /// Run one emulated streaming session.
    Stream {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Similarity vs random dropping, and blend on vs off.
    Ablate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long, default_value_t = 0.5)]
        drop_rate: f64,
        /// Seed of the random-drop baseline.
        #[arg(long, default_value_t = 0)]
        drop_seed: u64,
        #[arg(short, long, default_value = "ablate.csv")]
        output: PathBuf,
    },
    /// Time the pipeline stages.
    Bench {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        codec: CodecArgs,
        /// Also time one emulated session over the link flags.
        #[arg(long)]
        session: bool,
        #[command(flatten)]
        link: LinkArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Y4m,
    Rgb24,
}

#[derive(Args)]
struct InputArgs {
    /// Video file; else --synthetic content is generated.
    #[arg(short, long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "y4m")]
    format: Format,
    /// Synthetic content: static, square or noise.
    #[arg(long)]
    synthetic: Option<Content>,
    /// Required for rgb24 and synthetic input.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Overrides the y4m header rate.
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long, default_value_t = 90)]
    frames: usize,
    /// Synthetic content seed.
    #[arg(long, default_value_t = 1)]
    content_seed: u64,
}

impl InputArgs {
    fn given(&self) -> bool {
        self.input.is_some() || self.synthetic.is_some()
    }

    fn open(&self) -> Result<Box<dyn VideoSource>> {
        let input = match (&self.input, self.synthetic) {
            (Some(path), _) => Input::File {
                path: path.clone(),
                format: match self.format {
                    Format::Y4m => VideoFormat::Y4m,
                    Format::Rgb24 => VideoFormat::RawRgb24,
                },
                width: self.width.unwrap_or(0),
                height: self.height.unwrap_or(0),
                fps: self.fps,
            },
            (None, Some(content)) => Input::Synthetic {
                content,
                width: self.width.unwrap_or(720),
                height: self.height.unwrap_or(480),
                fps: self.fps.unwrap_or(30.0),
                frames: self.frames,
                seed: self.content_seed,
            },
            (None, None) => return Err(Error::InvalidParameter("give --input or --synthetic".into())),
        };
        input.open()
    }
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long, default_value_t = 2)]
    scale: u8,
    #[arg(long, default_value_t = 12)]
    channels: usize,
    #[arg(long, default_value_t = 2)]
    blend_width: usize,
}

impl CodecArgs {
    fn config(&self) -> Result<CodecConfig> {
        let c = CodecConfig {
            channels: self.channels,
            scale: self.scale,
            blend_width: self.blend_width,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct LinkArgs {
    /// Delivery-opportunity trace file.
    #[arg(long, conflicts_with_all = ["bandwidth", "square"])]
    trace: Option<PathBuf>,
    /// Constant forward capacity in bits per second.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Repeating segments as BPS:MS[,BPS:MS...].
    #[arg(long, conflicts_with = "bandwidth")]
    square: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seconds of content to stream.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    playout_ms: Option<u64>,
    #[arg(long)]
    prop_delay_ms: Option<u64>,
    #[arg(long)]
    queue_bytes: Option<usize>,
    #[arg(long)]
    no_hysteresis: bool,
    #[arg(long)]
    delta_up: Option<f64>,
    #[arg(long)]
    delta_down: Option<f64>,
    #[arg(long)]
    up_reports: Option<u32>,
    #[arg(long)]
    pacing_gain: Option<f64>,
    #[arg(long)]
    initial_bps: Option<f64>,
    #[arg(long)]
    report_interval_ms: Option<u64>,
}

fn parse_square(spec: &str) -> Result<Vec<(f64, u64)>> {
    spec.split(',')
        .map(|seg| {
            let bad = || Error::InvalidParameter(format!("square segment {seg:?}, want BPS:MS"));
            let (b, m) = seg.split_once(':').ok_or_else(bad)?;
            Ok((b.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

impl LinkArgs {
    fn config(&self) -> Result<SessionConfig> {
        let trace = match (&self.trace, self.bandwidth, &self.square) {
            (Some(p), _, _) => LinkTrace::load(p)?,
            (None, Some(bps), _) => LinkTrace::constant(bps, 1000)?,
            (None, None, Some(s)) => LinkTrace::square_wave(&parse_square(s)?)?,
            (None, None, None) => {
                return Err(Error::InvalidParameter("give --trace, --bandwidth or --square".into()))
            }
        };
        let mut cfg = SessionConfig::new(trace, self.loss, self.seed);
        cfg.duration_ms = self.duration.map(|s| (s * 1000.0).round() as u64);
        if let Some(v) = self.playout_ms {
            cfg.playout_delay_ms = v;
        }
        if let Some(v) = self.prop_delay_ms {
            cfg.forward.prop_delay_ms = v;
        }
        if let Some(v) = self.queue_bytes {
            cfg.forward.queue_bytes = v;
        }
        cfg.hysteresis.enabled = !self.no_hysteresis;
        if let Some(v) = self.delta_up {
            cfg.hysteresis.delta_up = v;
        }
        if let Some(v) = self.delta_down {
            cfg.hysteresis.delta_down = v;
        }
        if let Some(v) = self.up_reports {
            cfg.hysteresis.up_reports = v;
        }
        if let Some(v) = self.pacing_gain {
            cfg.pacing_gain = v;
        }
        if let Some(v) = self.report_interval_ms {
            cfg.report_interval_ms = v;
        }
        cfg.initial_bps = self.initial_bps;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Encode { input, codec, output, theta, quant_step, no_residual } => {
            let cfg = EncodeConfig {
                codec: codec.config()?,
                theta,
                quant_step,
                residual: !no_residual,
            };
            print_json(&cmd_encode(input.open()?.as_ref(), &cfg, &output)?)
        }
        Cmd::Decode { stream, output, reference } => {
            let src = if reference.given() { Some(reference.open()?) } else { None };
            print_json(&cmd_decode(&stream, output.as_deref(), src.as_deref())?)
        }
        Cmd::Stream { input, link, out } => {
            let cfg = link.config()?;
            let (report, _) = cmd_stream(input.open()?.as_ref(), &cfg, &out)?;
            print_json(&report)
        }
        Cmd::Ablate { input, codec, drop_rate, drop_seed, output } => {
            let cfg = AblateConfig {
                drop_rate,
                seed: drop_seed,
                codec: codec.config()?,
            };
            let (report, _) = cmd_ablate(input.open()?.as_ref(), &cfg, &output)?;
            print_json(&report)
        }
        Cmd::Bench { input, codec, session, link } => {
            let cfg = if session { Some(link.config()?) } else { None };
            print_json(&cmd_bench(input.open()?.as_ref(), &codec.config()?, cfg.as_ref())?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEMSTREAM_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
