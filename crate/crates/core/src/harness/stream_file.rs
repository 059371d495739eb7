use std::fs;
use std::io::Write;
use std::path::Path;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::codec::{
    blend_boundary, downscale_gop, scaled_dims, upscale_gop, BilinearUpscaler, CodecConfig, DctTokenizer, TokenKind,
    Tokenizer, Upscaler,
};
use crate::error::{Error, Result};
use crate::residual::{apply_residual, gop_residual, SparseResidual, DEFAULT_QUANT_STEP, DEFAULT_THETA};
use crate::synth::VideoSource;
use crate::transport::{packetize_tokens, reassemble, residual_from_packet, residual_packet, Packet, TokenPacket};
use crate::video::{encode_y4m_444, psnr_from_mse, sequence_mse, Frame, Gop, StreamMeta, GOP_LEN};

pub const STREAM_MAGIC: [u8; 4] = *b"SMSF";
pub const STREAM_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncodeConfig {
    pub codec: CodecConfig,
    pub theta: f32,
    pub quant_step: f32,
    /// Send a residual per GoP; off gives token-only output.
    pub residual: bool,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            codec: CodecConfig::default(),
            theta: DEFAULT_THETA,
            quant_step: DEFAULT_QUANT_STEP,
            residual: true,
        }
    }
}

/// JSON header at the front of a stream file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    #[serde(flatten)]
    pub meta: StreamMeta,
    pub channels: usize,
    pub blend_width: usize,
    pub theta: f32,
    pub quant_step: f32,
}

impl StreamHeader {
    fn codec(&self) -> CodecConfig {
        CodecConfig {
            channels: self.channels,
            scale: self.meta.scale,
            blend_width: self.blend_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeReport {
    pub gops: usize,
    pub frames: usize,
    pub packets: usize,
    pub file_bytes: usize,
    pub token_bytes: usize,
    pub residual_bytes: usize,
    /// Quality of what a decoder of this file shows, against the input.
    pub psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub gops: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Against a reference, when one was given.
    pub psnr_db: Option<f64>,
}

/// Pooled squared error over the unpadded frames of a sequence of GoPs.
#[derive(Default)]
struct MseAcc {
    sum: f64,
    samples: usize,
}

impl MseAcc {
    fn add(&mut self, reference: &[Frame], shown: &[Frame]) -> Result<()> {
        let n: usize = reference.iter().map(|f| f.samples().len()).sum();
        self.sum += sequence_mse(reference, shown)? * n as f64;
        self.samples += n;
        Ok(())
    }

    fn psnr(&self) -> f64 {
        psnr_from_mse(self.sum / self.samples.max(1) as f64)
    }
}

/// Decoder-side rendering shared by both ends: residual, upscale, blend.
struct Renderer<'a> {
    up: &'a dyn Upscaler,
    codec: CodecConfig,
    display: (usize, usize),
    prev: Option<Gop>,
}

impl Renderer<'_> {
    fn show(&mut self, recon: Gop, residual: Option<&SparseResidual>) -> Result<&Gop> {
        let recon = match residual {
            Some(sr) => apply_residual(&recon, sr)?,
            None => recon,
        };
        let shown = upscale_gop(&recon, self.codec.scale, self.display, self.up)?;
        let shown = match &self.prev {
            Some(p) => blend_boundary(p, &shown, self.codec.blend_width)?,
            None => shown,
        };
        Ok(self.prev.insert(shown))
    }
}

fn valid_frames(gop_index: usize, frame_count: usize) -> usize {
    frame_count.saturating_sub(gop_index * GOP_LEN).min(GOP_LEN)
}

fn put_record(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

/// Serializes a whole source: header, then every GoP's I rows, P rows and
/// residual as length-prefixed packets.
pub fn encode_stream(src: &dyn VideoSource, cfg: &EncodeConfig) -> Result<(Vec<u8>, EncodeReport)> {
    encode_stream_with(src, cfg, &DctTokenizer, &BilinearUpscaler)
}

pub fn encode_stream_with(
    src: &dyn VideoSource,
    cfg: &EncodeConfig,
    tok: &dyn Tokenizer,
    up: &dyn Upscaler,
) -> Result<(Vec<u8>, EncodeReport)> {
    cfg.codec.validate()?;
    if src.is_empty() {
        return Err(Error::InvalidParameter("input holds no frames".into()));
    }
    let display = src.dims();
    let header = StreamHeader {
        meta: StreamMeta {
            width: display.0,
            height: display.1,
            fps: src.fps(),
            frame_count: src.len(),
            scale: cfg.codec.scale,
        },
        channels: cfg.codec.channels,
        blend_width: cfg.codec.blend_width,
        theta: cfg.theta,
        quant_step: cfg.quant_step,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(&STREAM_MAGIC);
    out.push(STREAM_VERSION);
    put_record(&mut out, &json);

    let mut report = EncodeReport {
        gops: src.gop_count(),
        frames: src.len(),
        packets: 0,
        file_bytes: 0,
        token_bytes: 0,
        residual_bytes: 0,
        psnr_db: 0.0,
    };
    let mut render = Renderer { up, codec: cfg.codec, display, prev: None };
    let mut acc = MseAcc::default();
    let scale = cfg.codec.scale;
    for k in 0..src.gop_count() {
        let gop = src.gop(k)?;
        let work = downscale_gop(&gop, scale)?;
        let (i, p) = tok.encode(&work, &cfg.codec)?;
        let pi = packetize_tokens(&i, scale)?;
        let pp = packetize_tokens(&p, scale)?;
        let (ri, _) = reassemble(&pi, TokenKind::I, i.shape(), k as u64);
        let (rp, _) = reassemble(&pp, TokenKind::P, p.shape(), k as u64);
        let recon = tok.decode(&ri, &rp, &cfg.codec, work.dims())?;
        let sr = if cfg.residual {
            gop_residual(&work, &recon, cfg.theta, cfg.quant_step)?
        } else {
            SparseResidual::empty(k as u64, work.dims(), cfg.theta, cfg.quant_step, GOP_LEN as u16)
        };
        for tp in pi.into_iter().chain(pp) {
            let bytes = Packet::Token(tp).to_bytes()?;
            report.token_bytes += bytes.len();
            report.packets += 1;
            put_record(&mut out, &bytes);
        }
        let bytes = Packet::Residual(residual_packet(&sr, scale)?).to_bytes()?;
        report.residual_bytes += bytes.len();
        report.packets += 1;
        put_record(&mut out, &bytes);
        let shown = render.show(recon, Some(&sr))?;
        let n = valid_frames(k, src.len());
        acc.add(&gop.frames()[..n], &shown.frames()[..n])?;
        debug!("encoded GoP {k}");
    }
    report.file_bytes = out.len();
    report.psnr_db = acc.psnr();
    Ok((out, report))
}

pub fn cmd_encode(src: &dyn VideoSource, cfg: &EncodeConfig, output: &Path) -> Result<EncodeReport> {
    let (bytes, report) = encode_stream(src, cfg)?;
    fs::write(output, &bytes).map_err(|e| Error::io(output, e))?;
    Ok(report)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                offset: self.pos as u64,
                detail: format!("need {n} bytes for {what}, {} left", self.bytes.len() - self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn record(&mut self, what: &str) -> Result<&'a [u8]> {
        let len = u32::from_be_bytes(self.take(4, what)?.try_into().expect("four bytes")) as usize;
        self.take(len, what)
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

#[derive(Default)]
struct PendingGop {
    id: Option<u64>,
    scale: u8,
    i: Vec<TokenPacket>,
    p: Vec<TokenPacket>,
    residual: Option<SparseResidual>,
}

fn open_stream(bytes: &[u8]) -> Result<(StreamHeader, Reader<'_>)> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(4, "magic")? != STREAM_MAGIC {
        return Err(Error::CorruptPacket("not a semstream file".into()));
    }
    let version = rd.take(1, "version")?[0];
    if version != STREAM_VERSION {
        return Err(Error::CorruptPacket(format!("stream version {version}")));
    }
    let header: StreamHeader = serde_json::from_slice(rd.record("header")?)?;
    Ok((header, rd))
}

pub fn read_header(bytes: &[u8]) -> Result<StreamHeader> {
    open_stream(bytes).map(|(h, _)| h)
}

/// Parses a stream file and hands each decoded GoP's unpadded frames to
/// `sink`, in order.
pub fn decode_stream<F>(bytes: &[u8], mut sink: F) -> Result<(StreamHeader, DecodeReport)>
where
    F: FnMut(usize, &[Frame]) -> Result<()>,
{
    let (header, mut rd) = open_stream(bytes)?;
    let codec = header.codec();
    codec.validate()?;
    let display = (header.meta.width, header.meta.height);
    let tok = DctTokenizer;
    let mut render = Renderer { up: &BilinearUpscaler, codec, display, prev: None };
    let mut decoded = 0usize;
    let mut pending = PendingGop::default();
    let mut finish = |g: PendingGop, decoded: &mut usize| -> Result<()> {
        let Some(id) = g.id else { return Ok(()) };
        if id as usize != *decoded || g.scale != codec.scale {
            return Err(Error::CorruptPacket(format!("GoP {id} out of order or at scale {}", g.scale)));
        }
        let dims = scaled_dims(display, codec.scale);
        let (rows, cols) = CodecConfig::token_grid(dims.0, dims.1);
        let shape = (rows, cols, codec.channels);
        let (mi, _) = reassemble(&g.i, TokenKind::I, shape, id);
        let (mp, _) = reassemble(&g.p, TokenKind::P, shape, id);
        let recon = tok.decode(&mi, &mp, &codec, dims)?;
        let shown = render.show(recon, g.residual.as_ref())?;
        let n = valid_frames(*decoded, header.meta.frame_count);
        sink(*decoded, &shown.frames()[..n])?;
        *decoded += 1;
        Ok(())
    };
    while !rd.done() {
        let at = rd.pos;
        let pkt = Packet::parse(rd.record("packet")?)
            .map_err(|e| Error::CorruptPacket(format!("record at byte {at}: {e}")))?;
        let Some(id) = pkt.gop_id().map(u64::from) else { continue };
        if pending.id != Some(id) {
            finish(std::mem::take(&mut pending), &mut decoded)?;
            pending.id = Some(id);
        }
        match pkt {
            Packet::Token(tp) => {
                pending.scale = tp.scale;
                match tp.kind {
                    TokenKind::I => pending.i.push(tp),
                    TokenKind::P => pending.p.push(tp),
                }
            }
            Packet::Residual(rp) => {
                pending.scale = rp.scale;
                pending.residual = Some(residual_from_packet(&rp)?);
            }
            _ => {}
        }
    }
    finish(pending, &mut decoded)?;
    let report = DecodeReport {
        gops: decoded,
        frames: header.meta.frame_count.min(decoded * GOP_LEN),
        width: display.0,
        height: display.1,
        psnr_db: None,
    };
    Ok((header, report))
}

fn fps_ratio(fps: f64) -> (u32, u32) {
    let n = (fps * 1000.0).round().max(1.0) as u32;
    let g = gcd(n, 1000);
    (n / g, 1000 / g)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Decodes a stream file, optionally writing 4:4:4 y4m and scoring against
/// `reference`.
pub fn cmd_decode(input: &Path, output: Option<&Path>, reference: Option<&dyn VideoSource>) -> Result<DecodeReport> {
    let bytes = fs::read(input).map_err(|e| Error::io(input, e))?;
    let mut file = match output {
        Some(p) => Some((fs::File::create(p).map_err(|e| Error::io(p, e))?, p)),
        None => None,
    };
    let rate = fps_ratio(read_header(&bytes)?.meta.fps);
    let mut acc = MseAcc::default();
    let mut wrote_header = false;
    let (_, mut report) = decode_stream(&bytes, |k, frames| {
        if let Some(r) = reference {
            let g = r.gop(k)?;
            acc.add(&g.frames()[..frames.len()], frames)?;
        }
        if let Some((f, path)) = file.as_mut() {
            let chunk = encode_y4m_444(frames, rate)?;
            // one header for the whole file
            let body = if wrote_header {
                let cut = chunk.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
                &chunk[cut..]
            } else {
                &chunk[..]
            };
            f.write_all(body).map_err(|e| Error::io(*path, e))?;
            wrote_header = true;
        }
        Ok(())
    })?;
    if reference.is_some() {
        report.psnr_db = Some(acc.psnr());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Content, SyntheticVideo};
    use crate::video::{decode_y4m, psnr};

    fn clip() -> SyntheticVideo {
        // 20 frames leaves a padded third GoP
        SyntheticVideo::new(Content::MovingSquare, 80, 56, 30.0, 20, 6).unwrap()
    }

    /// Straight-line pipeline without files; `wire` routes tokens through
    /// packetization and its byte quantizer.
    fn direct_psnr(src: &dyn VideoSource, cfg: &EncodeConfig, wire: bool) -> f64 {
        let mut acc = MseAcc::default();
        let mut prev: Option<Gop> = None;
        for k in 0..src.gop_count() {
            let gop = src.gop(k).unwrap();
            let work = downscale_gop(&gop, cfg.codec.scale).unwrap();
            let (mut i, mut p) = DctTokenizer.encode(&work, &cfg.codec).unwrap();
            if wire {
                let s = cfg.codec.scale;
                i = reassemble(&packetize_tokens(&i, s).unwrap(), TokenKind::I, i.shape(), k as u64).0;
                p = reassemble(&packetize_tokens(&p, s).unwrap(), TokenKind::P, p.shape(), k as u64).0;
            }
            let recon = DctTokenizer.decode(&i, &p, &cfg.codec, work.dims()).unwrap();
            let sr = gop_residual(&work, &recon, cfg.theta, cfg.quant_step).unwrap();
            let fixed = apply_residual(&recon, &sr).unwrap();
            let mut shown = upscale_gop(&fixed, cfg.codec.scale, src.dims(), &BilinearUpscaler).unwrap();
            if let Some(pg) = &prev {
                shown = blend_boundary(pg, &shown, cfg.codec.blend_width).unwrap();
            }
            let n = valid_frames(k, src.len());
            acc.add(&gop.frames()[..n], &shown.frames()[..n]).unwrap();
            prev = Some(shown);
        }
        acc.psnr()
    }

    #[test]
    fn decode_reproduces_pipeline_psnr() {
        let v = clip();
        let cfg = EncodeConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("clip.sms");
        let y4m = dir.path().join("clip.y4m");
        let enc = cmd_encode(&v, &cfg, &file).unwrap();
        let dec = cmd_decode(&file, Some(&y4m), Some(&v)).unwrap();
        let want = direct_psnr(&v, &cfg, true);
        assert_eq!(enc.psnr_db, want);
        assert_eq!(dec.psnr_db, Some(want));
        assert!((direct_psnr(&v, &cfg, false) - want).abs() < 0.05);
        assert_eq!((dec.gops, dec.frames, dec.width, dec.height), (3, 20, 80, 56));
        assert_eq!(enc.file_bytes, std::fs::metadata(&file).unwrap().len() as usize);
        // the written y4m is 8-bit, so only close to the float score
        let (h, frames) = decode_y4m(&std::fs::read(&y4m).unwrap()).unwrap();
        assert_eq!((h.width, h.height, frames.len()), (80, 56, 20));
        assert_eq!(h.fps_f64(), Some(30.0));
        let p: f64 = (0..20).map(|i| psnr(&v.frame(i).unwrap(), &frames[i]).unwrap()).sum::<f64>() / 20.0;
        assert!((p - want).abs() < 1.0, "{p} vs {want}");
    }

    #[test]
    fn residual_off_scores_lower() {
        let v = SyntheticVideo::new(Content::StaticScene, 64, 48, 30.0, 9, 1).unwrap();
        let (_, on) = encode_stream(&v, &EncodeConfig::default()).unwrap();
        let (_, off) = encode_stream(&v, &EncodeConfig { residual: false, ..Default::default() }).unwrap();
        assert!(on.psnr_db > off.psnr_db);
        assert!(on.residual_bytes > off.residual_bytes);
        assert_eq!(on.token_bytes, off.token_bytes);
    }

    #[test]
    fn empty_input_is_an_error() {
        let src = SyntheticVideo::new(Content::MovingSquare, 32, 32, 30.0, 0, 1).unwrap();
        assert!(matches!(
            encode_stream(&src, &EncodeConfig::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn encoding_is_deterministic() {
        let cfg = EncodeConfig::default();
        let (a, _) = encode_stream(&clip(), &cfg).unwrap();
        let (b, _) = encode_stream(&clip(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[..4], &STREAM_MAGIC);
        assert_eq!(read_header(&a).unwrap().meta.frame_count, 20);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let (bytes, _) = encode_stream(&clip(), &EncodeConfig::default()).unwrap();
        let cut = bytes.len() - 7;
        match decode_stream(&bytes[..cut], |_, _| Ok(())) {
            Err(Error::Truncated { offset, .. }) => assert!(offset > 0 && (offset as usize) < cut),
            other => panic!("expected truncation, got {other:?}"),
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_stream(&bad, |_, _| Ok(())), Err(Error::CorruptPacket(_))));
    }
}
