use crate::codec::{TokenKind, TokenMatrix};
use crate::error::{Error, Result};
use crate::residual::SparseResidual;

use super::wire::{ResidualPacket, TokenPacket};

/// Splits a token matrix into one packet per row.
///
/// Rows with no valid token still produce a header-only packet. Each row is
/// quantized to bytes over its own `[min, max]` range of valid values.
pub fn packetize_tokens(m: &TokenMatrix, scale: u8) -> Result<Vec<TokenPacket>> {
    let (rows, cols, ch) = m.shape();
    let gop_id = u32::try_from(m.gop_id())
        .map_err(|_| Error::InvalidParameter(format!("gop id {} exceeds 32 bits", m.gop_id())))?;
    if rows > u16::MAX as usize || cols > u16::MAX as usize || ch > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "token matrix {rows}x{cols}x{ch} exceeds the packet header fields"
        )));
    }
    let mut packets = Vec::with_capacity(rows);
    for r in 0..rows {
        let mask = m.row_mask(r).to_vec();
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for c in (0..cols).filter(|c| mask[*c]) {
            for &v in m.token(r, c) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let (quant_min, quant_range) = if lo.is_finite() { (lo, hi - lo) } else { (0.0, 0.0) };
        let mut payload = Vec::with_capacity(cols * ch);
        for c in (0..cols).filter(|c| mask[*c]) {
            for &v in m.token(r, c) {
                payload.push(quantize(v, quant_min, quant_range));
            }
        }
        packets.push(TokenPacket {
            kind: m.kind(),
            gop_id,
            row: r as u16,
            width_tokens: cols as u16,
            channels: ch as u8,
            scale,
            quant_min,
            quant_range,
            mask,
            payload,
        });
    }
    Ok(packets)
}

fn quantize(v: f32, min: f32, range: f32) -> u8 {
    if range == 0.0 {
        return 0;
    }
    (255.0 * (v - min) / range).round().clamp(0.0, 255.0) as u8
}

pub fn dequantize(b: u8, min: f32, range: f32) -> f32 {
    min + b as f32 * range / 255.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReassemblyStats {
    pub accepted: usize,
    pub duplicates: usize,
    pub corrupt: usize,
}

/// Incrementally rebuilds one token matrix from row packets; the first
/// arrival of each row wins.
#[derive(Clone, Debug)]
pub struct MatrixAssembler {
    matrix: TokenMatrix,
    received: Vec<bool>,
    stats: ReassemblyStats,
}

impl MatrixAssembler {
    pub fn new(kind: TokenKind, expected: (usize, usize, usize), gop_id: u64) -> Self {
        let (rows, cols, ch) = expected;
        Self {
            matrix: TokenMatrix::empty(kind, rows, cols, ch, gop_id),
            received: vec![false; rows],
            stats: ReassemblyStats::default(),
        }
    }

    /// Returns true when the packet filled a new row.
    pub fn insert(&mut self, p: &TokenPacket) -> bool {
        let (rows, cols, ch) = self.matrix.shape();
        let row = p.row as usize;
        let well_formed = p.kind == self.matrix.kind()
            && p.gop_id as u64 == self.matrix.gop_id()
            && row < rows
            && p.width_tokens as usize == cols
            && p.channels as usize == ch
            && p.mask.len() == cols
            && p.payload.len() == p.valid_count() * ch;
        if !well_formed {
            self.stats.corrupt += 1;
            return false;
        }
        if self.received[row] {
            self.stats.duplicates += 1;
            return false;
        }
        self.received[row] = true;
        self.stats.accepted += 1;
        let mut bytes = p.payload.chunks_exact(ch);
        let mut token = vec![0.0f32; ch];
        for c in 0..cols {
            if p.mask[c] {
                for (t, b) in token.iter_mut().zip(bytes.next().unwrap()) {
                    *t = dequantize(*b, p.quant_min, p.quant_range);
                }
                self.matrix.set_token(row, c, &token);
            }
        }
        true
    }

    pub fn has_row(&self, row: usize) -> bool {
        self.received[row]
    }

    pub fn received_rows(&self) -> usize {
        self.received.iter().filter(|r| **r).count()
    }

    pub fn missing_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.received.iter().enumerate().filter(|(_, r)| !**r).map(|(i, _)| i)
    }

    pub fn stats(&self) -> ReassemblyStats {
        self.stats
    }

    pub fn matrix(&self) -> &TokenMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> TokenMatrix {
        self.matrix
    }
}

/// Rebuilds a token matrix from whatever row packets arrived.
///
/// Missing rows and masked-out positions become zero with an invalid mask.
pub fn reassemble(
    packets: &[TokenPacket],
    kind: TokenKind,
    expected: (usize, usize, usize),
    gop_id: u64,
) -> (TokenMatrix, ReassemblyStats) {
    let mut a = MatrixAssembler::new(kind, expected, gop_id);
    for p in packets {
        a.insert(p);
    }
    let stats = a.stats();
    (a.into_matrix(), stats)
}

pub fn residual_packet(sr: &SparseResidual, scale: u8) -> Result<ResidualPacket> {
    let (w, h, c) = sr.dims();
    let narrow = |v: usize, what: &str| {
        u16::try_from(v).map_err(|_| Error::InvalidParameter(format!("residual {what} {v} exceeds 16 bits")))
    };
    Ok(ResidualPacket {
        gop_id: u32::try_from(sr.gop_id())
            .map_err(|_| Error::InvalidParameter("gop id exceeds 32 bits".into()))?,
        scale,
        theta: sr.theta(),
        quant_step: sr.quant_step(),
        window_length: sr.window_length(),
        width: narrow(w, "width")?,
        height: narrow(h, "height")?,
        channels: c as u8,
        payload: sr.encode_payload(),
    })
}

pub fn residual_from_packet(p: &ResidualPacket) -> Result<SparseResidual> {
    if p.channels as usize != crate::video::CHANNELS {
        return Err(Error::CorruptPacket(format!("residual with {} channels", p.channels)));
    }
    SparseResidual::decode_payload(
        &p.payload,
        p.gop_id as u64,
        (p.width as usize, p.height as usize),
        p.theta,
        p.quant_step,
        p.window_length,
    )
}
