//! Command implementations behind the `semstream` binary: file encode and
//! decode, emulated streaming, ablations and timing.

mod ablate;
mod bench;
mod stream_file;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use ablate::{ablation_rows, blend_ablation, cmd_ablate, drop_ablation, AblateConfig, AblationReport, AblationRow, DropAblation};
pub use bench::{cmd_bench, BenchReport};
pub use stream_file::{
    cmd_decode, cmd_encode, decode_stream, encode_stream, encode_stream_with, read_header, DecodeReport, EncodeConfig, EncodeReport, StreamHeader,
    STREAM_MAGIC, STREAM_VERSION,
};

use crate::error::{Error, Result};
use crate::session::{run_session, SessionConfig, SessionOutput, SessionSummary};
use crate::synth::{Content, FrameVec, SyntheticVideo, VideoSource};
use crate::video::{decode_y4m, load_raw_video, Frame, VideoFormat};

/// Where frames come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    File {
        path: PathBuf,
        format: VideoFormat,
        /// Raw input only; y4m reads its header.
        width: usize,
        height: usize,
        /// Overrides the y4m rate; required for raw input.
        fps: Option<f64>,
    },
    Synthetic {
        content: Content,
        width: usize,
        height: usize,
        fps: f64,
        frames: usize,
        seed: u64,
    },
}

impl Input {
    pub fn open(&self) -> Result<Box<dyn VideoSource>> {
        match self {
            Input::File { path, format, width, height, fps } => {
                let (frames, header_fps) = match format {
                    VideoFormat::Y4m => {
                        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                        if bytes.is_empty() {
                            (Vec::new(), None)
                        } else {
                            let (h, frames) = decode_y4m(&bytes)?;
                            if (*width != 0 && *width != h.width) || (*height != 0 && *height != h.height) {
                                return Err(Error::DimensionMismatch(format!(
                                    "requested {width}x{height}, {} is {}x{}",
                                    path.display(),
                                    h.width,
                                    h.height
                                )));
                            }
                            (frames, h.fps_f64())
                        }
                    }
                    VideoFormat::RawRgb24 => (load_raw_video(path, *width, *height, *format)?, None),
                };
                if frames.is_empty() {
                    return Err(Error::InvalidParameter(format!("{} holds no frames", path.display())));
                }
                let rate = fps
                    .or(header_fps)
                    .ok_or_else(|| Error::InvalidParameter(format!("no frame rate known for {}", path.display())))?;
                Ok(Box::new(FrameVec::new(frames, rate)?))
            }
            Input::Synthetic { content, width, height, fps, frames, seed } => {
                Ok(Box::new(SyntheticVideo::new(*content, *width, *height, *fps, *frames, *seed)?))
            }
        }
    }
}

/// Every frame of a source, in order.
pub fn collect_frames(src: &dyn VideoSource) -> Result<Vec<Frame>> {
    (0..src.len()).map(|i| src.frame(i)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub summary: SessionSummary,
    pub events_csv: PathBuf,
    pub metrics_csv: PathBuf,
    pub summary_json: PathBuf,
}

/// Runs one emulated session and writes `events.csv`, `metrics.csv` and
/// `summary.json` into `out_dir`.
pub fn cmd_stream(src: &dyn VideoSource, cfg: &SessionConfig, out_dir: &Path) -> Result<(StreamReport, SessionOutput)> {
    let out = run_session(src, cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let events_csv = out_dir.join("events.csv");
    let metrics_csv = out_dir.join("metrics.csv");
    let summary_json = out_dir.join("summary.json");
    let create = |p: &Path| fs::File::create(p).map_err(|e| Error::io(p, e));
    out.log.write_csv(create(&events_csv)?)?;
    crate::session::write_metrics_csv(create(&metrics_csv)?, &out.metrics)?;
    fs::write(&summary_json, serde_json::to_string_pretty(&out.summary)?).map_err(|e| Error::io(&summary_json, e))?;
    let report = StreamReport {
        summary: out.summary.clone(),
        events_csv,
        metrics_csv,
        summary_json,
    };
    Ok((report, out))
}
