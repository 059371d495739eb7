//! Reference tokenizer: blockwise orthonormal DCT-II truncated to the lowest
//! zig-zag coefficients of each color channel.

use std::sync::OnceLock;

use super::tokens::{CodecConfig, TokenKind, TokenMatrix, SPATIAL_FACTOR};
use crate::error::{Error, Result};
use crate::video::{Frame, Gop, CHANNELS, GOP_LEN};

const B: usize = SPATIAL_FACTOR;

/// Orthonormal 1-D DCT-II basis: `basis[u][x]`.
fn basis() -> &'static [[f64; B]; B] {
    static BASIS: OnceLock<[[f64; B]; B]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; B]; B];
        for (u, row) in m.iter_mut().enumerate() {
            let alpha = if u == 0 { (1.0 / B as f64).sqrt() } else { (2.0 / B as f64).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = alpha * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / (2 * B) as f64).cos();
            }
        }
        m
    })
}

/// JPEG zig-zag order of an 8x8 block as `(row_freq, col_freq)` pairs.
pub fn zigzag() -> &'static [(usize, usize); B * B] {
    static ORDER: OnceLock<[(usize, usize); B * B]> = OnceLock::new();
    ORDER.get_or_init(|| {
        let mut out = [(0, 0); B * B];
        let mut k = 0;
        for s in 0..(2 * B - 1) {
            let lo = s.saturating_sub(B - 1);
            let hi = s.min(B - 1);
            let rows: Vec<usize> = if s % 2 == 0 {
                (lo..=hi).rev().collect()
            } else {
                (lo..=hi).collect()
            };
            for r in rows {
                out[k] = (r, s - r);
                k += 1;
            }
        }
        out
    })
}

/// 2-D basis image for zig-zag coefficient `k`, row-major `[y * 8 + x]`.
fn basis_image(k: usize) -> &'static [f32; B * B] {
    static IMAGES: OnceLock<Vec<[f32; B * B]>> = OnceLock::new();
    &IMAGES.get_or_init(|| {
        let b = basis();
        zigzag()
            .iter()
            .map(|&(u, v)| {
                let mut img = [0.0f32; B * B];
                for y in 0..B {
                    for x in 0..B {
                        img[y * B + x] = (b[u][y] * b[v][x]) as f32;
                    }
                }
                img
            })
            .collect()
    })[k]
}

/// Forward transform of one 8x8 block, returning the first `n` zig-zag coefficients.
pub fn forward_block(block: &[f32; B * B], n: usize, out: &mut [f32]) {
    for (k, o) in out.iter_mut().enumerate().take(n) {
        let img = basis_image(k);
        *o = block.iter().zip(img).map(|(a, b)| a * b).sum();
    }
}

/// Inverse transform from the first `coeffs.len()` zig-zag coefficients.
pub fn inverse_block(coeffs: &[f32], out: &mut [f32; B * B]) {
    out.fill(0.0);
    for (k, c) in coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let img = basis_image(k);
        for (o, b) in out.iter_mut().zip(img) {
            *o += c * b;
        }
    }
}

/// Gathers an 8x8 block, replicating edge samples beyond the frame.
fn read_block(plane: &[f32], width: usize, height: usize, bx: usize, by: usize, out: &mut [f32; B * B]) {
    for y in 0..B {
        let sy = (by * B + y).min(height - 1);
        for x in 0..B {
            let sx = (bx * B + x).min(width - 1);
            out[y * B + x] = plane[sy * width + sx];
        }
    }
}

fn tokenize_planes(
    planes: &[&[f32]; CHANNELS],
    width: usize,
    height: usize,
    cfg: &CodecConfig,
    kind: TokenKind,
    gop_id: u64,
) -> TokenMatrix {
    let (rows, cols) = CodecConfig::token_grid(width, height);
    let per_channel = cfg.channels / CHANNELS;
    let mut m = TokenMatrix::empty(kind, rows, cols, cfg.channels, gop_id);
    let mut block = [0.0f32; B * B];
    let mut token = vec![0.0f32; cfg.channels];
    for r in 0..rows {
        for c in 0..cols {
            for (ch, plane) in planes.iter().enumerate() {
                read_block(plane, width, height, c, r, &mut block);
                forward_block(&block, per_channel, &mut token[ch * per_channel..(ch + 1) * per_channel]);
            }
            m.set_token(r, c, &token);
        }
    }
    m
}

/// Encoder/decoder pair producing the two-layer token representation of a GoP.
///
/// Implementations must be deterministic; the rest of the stack relies on
/// the encoder's local decode matching the receiver's decode exactly.
pub trait Tokenizer: Send + Sync {
    fn encode(&self, gop: &Gop, cfg: &CodecConfig) -> Result<(TokenMatrix, TokenMatrix)>;

    /// Reconstructs a GoP of `dims` (working resolution) from possibly
    /// incomplete token matrices.
    fn decode(
        &self,
        i_tokens: &TokenMatrix,
        p_tokens: &TokenMatrix,
        cfg: &CodecConfig,
        dims: (usize, usize),
    ) -> Result<Gop>;
}

/// Block-DCT reference tokenizer.
#[derive(Clone, Copy, Debug, Default)]
pub struct DctTokenizer;

impl Tokenizer for DctTokenizer {
    fn encode(&self, gop: &Gop, cfg: &CodecConfig) -> Result<(TokenMatrix, TokenMatrix)> {
        encode_gop(gop, cfg)
    }

    fn decode(
        &self,
        i_tokens: &TokenMatrix,
        p_tokens: &TokenMatrix,
        cfg: &CodecConfig,
        dims: (usize, usize),
    ) -> Result<Gop> {
        decode_gop(i_tokens, p_tokens, cfg, dims)
    }
}

/// Per-sample mean of frames `1..9`.
pub fn temporal_mean(gop: &Gop) -> Vec<f32> {
    let frames = &gop.frames()[1..];
    let mut acc = vec![0.0f32; frames[0].samples().len()];
    for f in frames {
        for (a, s) in acc.iter_mut().zip(f.samples()) {
            *a += s;
        }
    }
    let n = frames.len() as f32;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Tokenizes a GoP: the I layer from frame 0, the P layer from the mean of frames 1..8.
pub fn encode_gop(gop: &Gop, cfg: &CodecConfig) -> Result<(TokenMatrix, TokenMatrix)> {
    if cfg.channels == 0 || !cfg.channels.is_multiple_of(CHANNELS) || cfg.channels > CHANNELS * B * B {
        return Err(Error::InvalidParameter(format!("unsupported channel count {}", cfg.channels)));
    }
    if gop.frames().len() != GOP_LEN {
        return Err(Error::InvalidParameter("GoP must hold 9 frames".into()));
    }
    let (w, h) = gop.dims();
    let f0 = gop.frame(0);
    let i = tokenize_planes(&[f0.plane(0), f0.plane(1), f0.plane(2)], w, h, cfg, TokenKind::I, gop.id());
    let mean = temporal_mean(gop);
    let n = w * h;
    let p = tokenize_planes(
        &[&mean[..n], &mean[n..2 * n], &mean[2 * n..]],
        w,
        h,
        cfg,
        TokenKind::P,
        gop.id(),
    );
    Ok((i, p))
}

fn render(tokens: &[&[f32]], width: usize, height: usize, per_channel: usize, rows: usize, cols: usize) -> Vec<f32> {
    let n = width * height;
    let mut out = vec![0.0f32; n * CHANNELS];
    let mut block = [0.0f32; B * B];
    for r in 0..rows {
        for c in 0..cols {
            let token = tokens[r * cols + c];
            for ch in 0..CHANNELS {
                inverse_block(&token[ch * per_channel..(ch + 1) * per_channel], &mut block);
                for y in 0..B {
                    let py = r * B + y;
                    if py >= height {
                        break;
                    }
                    for x in 0..B {
                        let px = c * B + x;
                        if px >= width {
                            break;
                        }
                        out[ch * n + py * width + px] = block[y * B + x].clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    out
}

/// Reconstructs a GoP from its token layers.
///
/// Invalid P tokens are concealed with the co-located I token and invalid I
/// tokens with the co-located P token; a position missing from both decodes
/// from zeros.
pub fn decode_gop(
    i_tokens: &TokenMatrix,
    p_tokens: &TokenMatrix,
    cfg: &CodecConfig,
    dims: (usize, usize),
) -> Result<Gop> {
    if i_tokens.shape() != p_tokens.shape() {
        return Err(Error::DimensionMismatch(format!(
            "I tokens {:?} vs P tokens {:?}",
            i_tokens.shape(),
            p_tokens.shape()
        )));
    }
    if i_tokens.channels() != cfg.channels || !cfg.channels.is_multiple_of(CHANNELS) {
        return Err(Error::DimensionMismatch(format!(
            "tokens carry {} channels, config expects {}",
            i_tokens.channels(),
            cfg.channels
        )));
    }
    let (w, h) = dims;
    if CodecConfig::token_grid(w, h) != (i_tokens.rows(), i_tokens.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "{w}x{h} frames need a {:?} token grid, got {}x{}",
            CodecConfig::token_grid(w, h),
            i_tokens.rows(),
            i_tokens.cols()
        )));
    }
    let (rows, cols) = (i_tokens.rows(), i_tokens.cols());
    let per_channel = cfg.channels / CHANNELS;
    let mut i_src = Vec::with_capacity(rows * cols);
    let mut p_src = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (iv, pv) = (i_tokens.is_valid(r, c), p_tokens.is_valid(r, c));
            let i_tok = i_tokens.token(r, c);
            let p_tok = p_tokens.token(r, c);
            i_src.push(if iv || !pv { i_tok } else { p_tok });
            p_src.push(if pv || !iv { p_tok } else { i_tok });
        }
    }
    let id = i_tokens.gop_id();
    let i_frame = Frame::new(w, h, 0, render(&i_src, w, h, per_channel, rows, cols))?;
    let p_samples = render(&p_src, w, h, per_channel, rows, cols);
    let mut frames = Vec::with_capacity(GOP_LEN);
    frames.push(i_frame);
    for k in 1..GOP_LEN {
        frames.push(Frame::new(w, h, k as u64, p_samples.clone())?);
    }
    Gop::new(id, frames, cfg.scale)
}
