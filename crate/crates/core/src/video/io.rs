use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::frame::{Frame, CHANNELS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VideoFormat {
    /// Packed 8-bit RGB, `width * height * 3` bytes per frame, no header.
    RawRgb24,
    /// YUV4MPEG2 with 4:2:0 or 4:4:4 chroma.
    Y4m,
}

/// JSON sidecar describing a stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    /// Number of frames before GoP padding.
    pub frame_count: usize,
    pub scale: u8,
}

impl StreamMeta {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Loads a whole video file into normalized frames.
///
/// `width`/`height` describe raw input; for y4m they are read from the
/// header and the arguments, if non-zero, must agree with it.
pub fn load_raw_video(
    path: &Path,
    width: usize,
    height: usize,
    format: VideoFormat,
) -> Result<Vec<Frame>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        VideoFormat::RawRgb24 => decode_rgb24(&bytes, width, height),
        VideoFormat::Y4m => {
            if bytes.is_empty() {
                return Ok(Vec::new());
            }
            let (header, frames) = decode_y4m(&bytes)?;
            if (width != 0 && width != header.width) || (height != 0 && height != header.height) {
                return Err(Error::DimensionMismatch(format!(
                    "requested {width}x{height}, y4m header says {}x{}",
                    header.width, header.height
                )));
            }
            Ok(frames)
        }
    }
}

#[inline]
fn norm8(v: u8) -> f32 {
    v as f32 / 255.0
}

#[inline]
fn to8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn decode_rgb24(bytes: &[u8], width: usize, height: usize) -> Result<Vec<Frame>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("raw video needs positive dimensions".into()));
    }
    let frame_bytes = width * height * CHANNELS;
    let whole = bytes.len() / frame_bytes;
    if !bytes.len().is_multiple_of(frame_bytes) {
        let offset = (whole * frame_bytes) as u64;
        return Err(Error::Truncated {
            offset,
            detail: format!(
                "frame {whole} has {} of {frame_bytes} bytes",
                bytes.len() - whole * frame_bytes
            ),
        });
    }
    let plane = width * height;
    bytes
        .chunks_exact(frame_bytes)
        .enumerate()
        .map(|(i, chunk)| {
            let mut samples = vec![0.0f32; frame_bytes];
            for (p, px) in chunk.chunks_exact(CHANNELS).enumerate() {
                for c in 0..CHANNELS {
                    samples[c * plane + p] = norm8(px[c]);
                }
            }
            Frame::new(width, height, i as u64, samples)
        })
        .collect()
}

pub fn encode_rgb24(frames: &[Frame]) -> Vec<u8> {
    let mut out = Vec::new();
    for f in frames {
        let plane = f.width() * f.height();
        out.reserve(plane * CHANNELS);
        for p in 0..plane {
            for c in 0..CHANNELS {
                out.push(to8(f.samples()[c * plane + p]));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Chroma {
    C420,
    C444,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    /// Frame rate as numerator/denominator, if present.
    pub fps: Option<(u32, u32)>,
    pub colorspace: String,
}

impl Y4mHeader {
    pub fn fps_f64(&self) -> Option<f64> {
        self.fps.map(|(n, d)| n as f64 / d.max(1) as f64)
    }
}

fn parse_y4m_header(line: &str) -> Result<(Y4mHeader, Chroma)> {
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some("YUV4MPEG2") {
        return Err(Error::Y4mHeader("missing YUV4MPEG2 signature".into()));
    }
    let mut width = None;
    let mut height = None;
    let mut fps = None;
    let mut colorspace = "420jpeg".to_string();
    for p in parts {
        let (tag, val) = p.split_at(1);
        match tag {
            "W" => width = val.parse().ok(),
            "H" => height = val.parse().ok(),
            "F" => {
                fps = val
                    .split_once(':')
                    .and_then(|(n, d)| Some((n.parse().ok()?, d.parse().ok()?)))
            }
            "C" => colorspace = val.to_string(),
            _ => {}
        }
    }
    let (Some(width), Some(height)) = (width, height) else {
        return Err(Error::Y4mHeader("header lacks W or H".into()));
    };
    if width == 0 || height == 0 {
        return Err(Error::Y4mHeader("zero dimension".into()));
    }
    let chroma = match colorspace.as_str() {
        "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
        "444" => Chroma::C444,
        other => return Err(Error::UnsupportedColorspace(other.to_string())),
    };
    Ok((
        Y4mHeader {
            width,
            height,
            fps,
            colorspace,
        },
        chroma,
    ))
}

/// Full-range BT.601 YCbCr to normalized RGB.
pub fn ycbcr_to_rgb(y: u8, cb: u8, cr: u8) -> [f32; 3] {
    let y = y as f32;
    let cb = cb as f32 - 128.0;
    let cr = cr as f32 - 128.0;
    let r = y + 1.402 * cr;
    let g = y - 0.344_136 * cb - 0.714_136 * cr;
    let b = y + 1.772 * cb;
    [r, g, b].map(|v| (v / 255.0).clamp(0.0, 1.0))
}

/// Normalized RGB to full-range BT.601 YCbCr.
pub fn rgb_to_ycbcr(rgb: [f32; 3]) -> [u8; 3] {
    let [r, g, b] = rgb.map(|v| v.clamp(0.0, 1.0) * 255.0);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    [y, cb, cr].map(|v| v.round().clamp(0.0, 255.0) as u8)
}

fn find_newline(bytes: &[u8], from: usize) -> Option<usize> {
    bytes[from..].iter().position(|&b| b == b'\n').map(|p| from + p)
}

pub fn decode_y4m(bytes: &[u8]) -> Result<(Y4mHeader, Vec<Frame>)> {
    let Some(eol) = find_newline(bytes, 0) else {
        return Err(Error::Y4mHeader("header line is not terminated".into()));
    };
    let line = std::str::from_utf8(&bytes[..eol])
        .map_err(|_| Error::Y4mHeader("header is not ASCII".into()))?;
    let (header, chroma) = parse_y4m_header(line)?;
    let (w, h) = (header.width, header.height);
    let (cw, ch) = match chroma {
        Chroma::C420 => (w.div_ceil(2), h.div_ceil(2)),
        Chroma::C444 => (w, h),
    };
    let frame_payload = w * h + 2 * cw * ch;
    let mut frames = Vec::new();
    let mut pos = eol + 1;
    while pos < bytes.len() {
        let eol = find_newline(bytes, pos).ok_or_else(|| Error::Truncated {
            offset: pos as u64,
            detail: "unterminated FRAME marker".into(),
        })?;
        if !bytes[pos..eol].starts_with(b"FRAME") {
            return Err(Error::Y4mHeader(format!("expected FRAME marker at byte {pos}")));
        }
        let start = eol + 1;
        if bytes.len() < start + frame_payload {
            return Err(Error::Truncated {
                offset: start as u64,
                detail: format!(
                    "frame {} needs {frame_payload} bytes, {} remain",
                    frames.len(),
                    bytes.len() - start
                ),
            });
        }
        let yp = &bytes[start..start + w * h];
        let up = &bytes[start + w * h..start + w * h + cw * ch];
        let vp = &bytes[start + w * h + cw * ch..start + frame_payload];
        let plane = w * h;
        let mut samples = vec![0.0f32; plane * CHANNELS];
        for y in 0..h {
            for x in 0..w {
                let ci = match chroma {
                    Chroma::C420 => (y / 2) * cw + x / 2,
                    Chroma::C444 => y * cw + x,
                };
                let rgb = ycbcr_to_rgb(yp[y * w + x], up[ci], vp[ci]);
                for c in 0..CHANNELS {
                    samples[c * plane + y * w + x] = rgb[c];
                }
            }
        }
        frames.push(Frame::new(w, h, frames.len() as u64, samples)?);
        pos = start + frame_payload;
    }
    Ok((header, frames))
}

/// Writes frames as a 4:4:4 y4m stream.
pub fn encode_y4m_444(frames: &[Frame], fps: (u32, u32)) -> Result<Vec<u8>> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidParameter("no frames to write".into()));
    };
    let (w, h) = first.dims();
    let mut out = format!("YUV4MPEG2 W{w} H{h} F{}:{} Ip A1:1 C444\n", fps.0, fps.1).into_bytes();
    for f in frames {
        first.check_same_dims(f)?;
        let mut planes = [vec![0u8; w * h], vec![0u8; w * h], vec![0u8; w * h]];
        for y in 0..h {
            for x in 0..w {
                let ycc = rgb_to_ycbcr([f.get(x, y, 0), f.get(x, y, 1), f.get(x, y, 2)]);
                for c in 0..3 {
                    planes[c][y * w + x] = ycc[c];
                }
            }
        }
        out.extend_from_slice(b"FRAME\n");
        for p in &planes {
            out.extend_from_slice(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_frame_count() {
        let bytes = vec![7u8; 64 * 64 * 3 * 27];
        let frames = decode_rgb24(&bytes, 64, 64).unwrap();
        assert_eq!(frames.len(), 27);
        assert!(frames.iter().all(|f| f.dims() == (64, 64)));
        assert_eq!(frames[26].index(), 26);
    }

    #[test]
    fn empty_raw_is_empty_sequence() {
        assert!(decode_rgb24(&[], 8, 8).unwrap().is_empty());
    }

    #[test]
    fn truncated_raw_names_offset() {
        let bytes = vec![0u8; 4 * 4 * 3 * 2 + 5];
        match decode_rgb24(&bytes, 4, 4) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 96),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn extremes_round_trip() {
        let bytes: Vec<u8> = [0u8, 255, 128].repeat(4);
        let frames = decode_rgb24(&bytes, 2, 2).unwrap();
        assert_eq!(frames[0].get(0, 0, 0), 0.0);
        assert_eq!(frames[0].get(0, 0, 1), 1.0);
        assert_eq!(encode_rgb24(&frames), bytes);
    }

    #[test]
    fn y4m_420_gray() {
        let w = 4;
        let h = 2;
        let mut bytes = format!("YUV4MPEG2 W{w} H{h} F30:1 Ip C420jpeg\nFRAME\n").into_bytes();
        bytes.extend(vec![128u8; w * h + 2 * (w / 2) * (h / 2)]);
        let (header, frames) = decode_y4m(&bytes).unwrap();
        assert_eq!(header.fps_f64(), Some(30.0));
        assert_eq!(frames.len(), 1);
        for &s in frames[0].samples() {
            assert!((s - 0.502).abs() <= 0.01, "{s}");
        }
    }

    #[test]
    fn y4m_unsupported_colorspace() {
        let bytes = b"YUV4MPEG2 W2 H2 C422\nFRAME\n".to_vec();
        assert!(matches!(decode_y4m(&bytes), Err(Error::UnsupportedColorspace(c)) if c == "422"));
        let mono = b"YUV4MPEG2 W2 H2 Cmono\n".to_vec();
        assert!(decode_y4m(&mono).is_err());
    }

    #[test]
    fn y4m_truncated_frame() {
        let mut bytes = b"YUV4MPEG2 W2 H2 C444\nFRAME\n".to_vec();
        bytes.extend([0u8; 7]);
        assert!(matches!(decode_y4m(&bytes), Err(Error::Truncated { offset: 27, .. })));
    }

    #[test]
    fn y4m_444_round_trip() {
        let frames: Vec<Frame> = (0..3)
            .map(|i| Frame::from_fn(5, 3, i, |x, y, c| ((x * 40 + y * 70 + c * 30) % 256) as f32 / 255.0).unwrap())
            .collect();
        let bytes = encode_y4m_444(&frames, (30, 1)).unwrap();
        let (header, back) = decode_y4m(&bytes).unwrap();
        assert_eq!((header.width, header.height), (5, 3));
        for (a, b) in frames.iter().zip(&back) {
            for (x, y) in a.samples().iter().zip(b.samples()) {
                assert!((x - y).abs() < 0.02, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn sidecar_json() {
        let meta = StreamMeta {
            width: 720,
            height: 480,
            fps: 30.0,
            frame_count: 27,
            scale: 3,
        };
        let back = StreamMeta::from_json(&meta.to_json().unwrap()).unwrap();
        assert_eq!(meta, back);
        let v: serde_json::Value = serde_json::from_str(&meta.to_json().unwrap()).unwrap();
        for key in ["width", "height", "fps", "frame_count", "scale"] {
            assert!(v.get(key).is_some());
        }
    }
}
