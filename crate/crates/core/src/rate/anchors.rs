use serde::{Deserialize, Serialize};

use crate::codec::{scaled_dims, CodecConfig, TokenKind, TokenMatrix};
use crate::error::{Error, Result};
use crate::transport::{packetize_tokens, Packet};
use crate::video::GOP_LEN;

/// Full-mask token stream rates at the two operating scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateAnchors {
    pub r_3x: f64,
    pub r_2x: f64,
}

impl RateAnchors {
    pub fn new(r_3x: f64, r_2x: f64) -> Result<Self> {
        if !(r_3x > 0.0 && r_3x < r_2x && r_2x.is_finite()) {
            return Err(Error::InvalidParameter(format!("anchors need 0 < r_3x < r_2x, got {r_3x} / {r_2x}")));
        }
        Ok(Self { r_3x, r_2x })
    }

    pub fn for_scale(&self, scale: u8) -> f64 {
        if scale == 3 {
            self.r_3x
        } else {
            self.r_2x
        }
    }
}

/// Serialized bytes of one GoP's I and P packets with every token present.
pub fn gop_token_bytes(display: (usize, usize), scale: u8, channels: usize) -> Result<usize> {
    let (w, h) = scaled_dims(display, scale);
    let (rows, cols) = CodecConfig::token_grid(w, h);
    let mut total = 0;
    for kind in [TokenKind::I, TokenKind::P] {
        let m = TokenMatrix::from_parts(
            kind,
            rows,
            cols,
            channels,
            vec![0.0; rows * cols * channels],
            vec![true; rows * cols],
            0,
        )?;
        for p in packetize_tokens(&m, scale)? {
            total += Packet::Token(p).to_bytes()?.len();
        }
    }
    Ok(total)
}

/// `r_s = gop_bytes(s) * 8 * fps / 9`, plus `extra_gop_bytes` of fixed
/// per-GoP overhead such as an always-sent residual header.
pub fn compute_anchors(
    display: (usize, usize),
    fps: f64,
    cfg: &CodecConfig,
    extra_gop_bytes: usize,
) -> Result<RateAnchors> {
    if display.0 == 0 || display.1 == 0 || !(fps > 0.0) {
        return Err(Error::InvalidParameter(format!("anchors for {display:?} at {fps} fps")));
    }
    let rate = |s: u8| -> Result<f64> {
        let bytes = gop_token_bytes(display, s, cfg.channels)? + extra_gop_bytes;
        Ok(bytes as f64 * 8.0 * fps / GOP_LEN as f64)
    };
    RateAnchors::new(rate(3)?, rate(2)?)
}
