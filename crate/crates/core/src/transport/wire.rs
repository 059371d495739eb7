//! Packet serialization. Integers and reals are big-endian; every packet
//! ends with a CRC-32 (ISO-HDLC) over all preceding bytes.

use crate::codec::TokenKind;
use crate::error::{Error, Result};

pub const MAGIC: u16 = 0x4D53;
pub const VERSION: u8 = 1;
/// Fixed part of a token packet: header fields plus trailing CRC.
pub const TOKEN_FIXED_BYTES: usize = 22 + 4;
pub const RESIDUAL_FIXED_BYTES: usize = 28 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PacketKind {
    IToken = 0,
    PToken = 1,
    Residual = 2,
    Nack = 3,
    BwReport = 4,
}

impl PacketKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => Self::IToken,
            1 => Self::PToken,
            2 => Self::Residual,
            3 => Self::Nack,
            4 => Self::BwReport,
            _ => return None,
        })
    }

    pub fn from_token(kind: TokenKind) -> Self {
        match kind {
            TokenKind::I => Self::IToken,
            TokenKind::P => Self::PToken,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::IToken => "I",
            Self::PToken => "P",
            Self::Residual => "R",
            Self::Nack => "NACK",
            Self::BwReport => "BW",
        }
    }
}

/// One row of a token matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenPacket {
    pub kind: TokenKind,
    pub gop_id: u32,
    pub row: u16,
    pub width_tokens: u16,
    pub channels: u8,
    pub scale: u8,
    pub quant_min: f32,
    pub quant_range: f32,
    /// One flag per column, true for a carried token.
    pub mask: Vec<bool>,
    /// `popcount(mask) * channels` quantized bytes, column-major then channel.
    pub payload: Vec<u8>,
}

impl TokenPacket {
    pub fn wire_len(&self) -> usize {
        TOKEN_FIXED_BYTES + (self.width_tokens as usize).div_ceil(8) + self.payload.len()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualPacket {
    pub gop_id: u32,
    pub scale: u8,
    pub theta: f32,
    pub quant_step: f32,
    pub window_length: u16,
    pub width: u16,
    pub height: u16,
    pub channels: u8,
    pub payload: Vec<u8>,
}

impl ResidualPacket {
    pub fn wire_len(&self) -> usize {
        RESIDUAL_FIXED_BYTES + self.payload.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NackPacket {
    pub gop_id: u32,
    pub missing: Vec<(TokenKind, u16)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BwReport {
    pub timestamp_ms: u64,
    pub bandwidth_bps: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Packet {
    Token(TokenPacket),
    Residual(ResidualPacket),
    Nack(NackPacket),
    BwReport(BwReport),
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Token(t) => PacketKind::from_token(t.kind),
            Packet::Residual(_) => PacketKind::Residual,
            Packet::Nack(_) => PacketKind::Nack,
            Packet::BwReport(_) => PacketKind::BwReport,
        }
    }

    pub fn gop_id(&self) -> Option<u32> {
        match self {
            Packet::Token(t) => Some(t.gop_id),
            Packet::Residual(r) => Some(r.gop_id),
            Packet::Nack(n) => Some(n.gop_id),
            Packet::BwReport(_) => None,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC.to_be_bytes());
        out.push(VERSION);
        out.push(self.kind() as u8);
        match self {
            Packet::Token(t) => {
                let cols = t.width_tokens as usize;
                if t.mask.len() != cols || t.payload.len() != t.valid_count() * t.channels as usize {
                    return Err(Error::InvalidParameter(format!(
                        "token packet row {}: mask {} / payload {} inconsistent",
                        t.row,
                        t.mask.len(),
                        t.payload.len()
                    )));
                }
                out.extend_from_slice(&t.gop_id.to_be_bytes());
                out.extend_from_slice(&t.row.to_be_bytes());
                out.extend_from_slice(&t.width_tokens.to_be_bytes());
                out.push(t.channels);
                out.push(t.scale);
                out.extend_from_slice(&t.quant_min.to_be_bytes());
                out.extend_from_slice(&t.quant_range.to_be_bytes());
                let mut bits = vec![0u8; cols.div_ceil(8)];
                for (i, _) in t.mask.iter().enumerate().filter(|(_, m)| **m) {
                    bits[i / 8] |= 0x80 >> (i % 8);
                }
                out.extend_from_slice(&bits);
                out.extend_from_slice(&t.payload);
            }
            Packet::Residual(r) => {
                let len = u32::try_from(r.payload.len())
                    .map_err(|_| Error::InvalidParameter("residual payload too large".into()))?;
                out.extend_from_slice(&r.gop_id.to_be_bytes());
                out.push(r.scale);
                out.extend_from_slice(&r.theta.to_be_bytes());
                out.extend_from_slice(&r.quant_step.to_be_bytes());
                out.extend_from_slice(&r.window_length.to_be_bytes());
                out.extend_from_slice(&r.width.to_be_bytes());
                out.extend_from_slice(&r.height.to_be_bytes());
                out.push(r.channels);
                out.extend_from_slice(&len.to_be_bytes());
                out.extend_from_slice(&r.payload);
            }
            Packet::Nack(n) => {
                let count = u16::try_from(n.missing.len())
                    .map_err(|_| Error::InvalidParameter("too many rows in one nack".into()))?;
                out.extend_from_slice(&n.gop_id.to_be_bytes());
                out.extend_from_slice(&count.to_be_bytes());
                for &(k, row) in &n.missing {
                    out.push(PacketKind::from_token(k) as u8);
                    out.extend_from_slice(&row.to_be_bytes());
                }
            }
            Packet::BwReport(b) => {
                out.extend_from_slice(&b.timestamp_ms.to_be_bytes());
                out.extend_from_slice(&b.bandwidth_bps.to_be_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_be_bytes());
        Ok(out)
    }

    pub fn parse(bytes: &[u8]) -> Result<Packet> {
        if bytes.len() < 8 {
            return Err(corrupt(0, "shorter than the minimal packet"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let crc = u32::from_be_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != crc {
            return Err(Error::CorruptPacket("crc mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.u16()? != MAGIC {
            return Err(Error::CorruptPacket("bad magic".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::CorruptPacket(format!("unsupported version {version}")));
        }
        let kind_byte = r.u8()?;
        let kind = PacketKind::from_byte(kind_byte)
            .ok_or_else(|| Error::CorruptPacket(format!("unknown packet kind {kind_byte}")))?;
        let packet = match kind {
            PacketKind::IToken | PacketKind::PToken => {
                let gop_id = r.u32()?;
                let row = r.u16()?;
                let width_tokens = r.u16()?;
                let channels = r.u8()?;
                let scale = r.u8()?;
                let quant_min = r.f32()?;
                let quant_range = r.f32()?;
                if !quant_min.is_finite() || !(quant_range >= 0.0) || !quant_range.is_finite() {
                    return Err(corrupt(r.pos, "bad quantizer range"));
                }
                let cols = width_tokens as usize;
                let bits = r.take(cols.div_ceil(8))?;
                let mask: Vec<bool> = (0..cols).map(|i| bits[i / 8] & (0x80 >> (i % 8)) != 0).collect();
                if !cols.is_multiple_of(8) && bits[cols / 8] & (0xFFu8 >> (cols % 8)) != 0 {
                    return Err(corrupt(r.pos, "mask padding bits set"));
                }
                let n = mask.iter().filter(|m| **m).count() * channels as usize;
                let payload = r.take(n)?.to_vec();
                Packet::Token(TokenPacket {
                    kind: if kind == PacketKind::IToken { TokenKind::I } else { TokenKind::P },
                    gop_id,
                    row,
                    width_tokens,
                    channels,
                    scale,
                    quant_min,
                    quant_range,
                    mask,
                    payload,
                })
            }
            PacketKind::Residual => {
                let gop_id = r.u32()?;
                let scale = r.u8()?;
                let theta = r.f32()?;
                let quant_step = r.f32()?;
                let window_length = r.u16()?;
                let width = r.u16()?;
                let height = r.u16()?;
                let channels = r.u8()?;
                let len = r.u32()? as usize;
                let payload = r.take(len)?.to_vec();
                Packet::Residual(ResidualPacket {
                    gop_id,
                    scale,
                    theta,
                    quant_step,
                    window_length,
                    width,
                    height,
                    channels,
                    payload,
                })
            }
            PacketKind::Nack => {
                let gop_id = r.u32()?;
                let count = r.u16()? as usize;
                let mut missing = Vec::with_capacity(count);
                for _ in 0..count {
                    let k = match PacketKind::from_byte(r.u8()?) {
                        Some(PacketKind::IToken) => TokenKind::I,
                        Some(PacketKind::PToken) => TokenKind::P,
                        _ => return Err(corrupt(r.pos, "nack entry names a non-token kind")),
                    };
                    missing.push((k, r.u16()?));
                }
                Packet::Nack(NackPacket { gop_id, missing })
            }
            PacketKind::BwReport => Packet::BwReport(BwReport {
                timestamp_ms: r.u64()?,
                bandwidth_bps: r.u32()?,
            }),
        };
        if r.pos != body.len() {
            return Err(corrupt(r.pos, "trailing bytes"));
        }
        Ok(packet)
    }
}

fn corrupt(offset: usize, what: &str) -> Error {
    Error::CorruptPacket(format!("{what} at byte {offset}"))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let Some(end) = end else {
            return Err(corrupt(self.pos, "truncated field"));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_token() -> TokenPacket {
        TokenPacket {
            kind: TokenKind::P,
            gop_id: 7,
            row: 3,
            width_tokens: 10,
            channels: 2,
            scale: 2,
            quant_min: -1.5,
            quant_range: 3.25,
            mask: vec![true, false, true, true, false, false, false, false, true, false],
            payload: (0..8).collect(),
        }
    }

    #[test]
    fn token_layout_is_fixed() {
        let bytes = Packet::Token(sample_token()).to_bytes().unwrap();
        assert_eq!(bytes.len(), sample_token().wire_len());
        assert_eq!(&bytes[..4], &[0x4D, 0x53, 1, 1]);
        assert_eq!(&bytes[4..8], &7u32.to_be_bytes());
        assert_eq!(&bytes[8..10], &3u16.to_be_bytes());
        assert_eq!(&bytes[10..12], &10u16.to_be_bytes());
        assert_eq!(bytes[12], 2);
        assert_eq!(bytes[13], 2);
        assert_eq!(&bytes[14..18], &(-1.5f32).to_be_bytes());
        assert_eq!(&bytes[18..22], &3.25f32.to_be_bytes());
        assert_eq!(&bytes[22..24], &[0b1011_0000, 0b1000_0000]);
        assert_eq!(&bytes[24..32], &[0, 1, 2, 3, 4, 5, 6, 7]);
        let crc = crc32fast::hash(&bytes[..32]);
        assert_eq!(&bytes[32..], &crc.to_be_bytes());
    }

    #[test]
    fn crc_is_iso_hdlc() {
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn all_kinds_round_trip() {
        let packets = vec![
            Packet::Token(sample_token()),
            Packet::Residual(ResidualPacket {
                gop_id: 1,
                scale: 3,
                theta: 0.02,
                quant_step: 1.0 / 127.0,
                window_length: 9,
                width: 40,
                height: 30,
                channels: 3,
                payload: vec![9, 8, 7],
            }),
            Packet::Nack(NackPacket {
                gop_id: 5,
                missing: vec![(TokenKind::I, 0), (TokenKind::P, 12)],
            }),
            Packet::BwReport(BwReport {
                timestamp_ms: 123_456,
                bandwidth_bps: 500_000,
            }),
        ];
        for p in packets {
            let bytes = p.to_bytes().unwrap();
            assert_eq!(Packet::parse(&bytes).unwrap(), p);
        }
    }

    #[test]
    fn nack_and_report_sizes() {
        let n = Packet::Nack(NackPacket {
            gop_id: 5,
            missing: vec![(TokenKind::I, 0), (TokenKind::P, 12)],
        });
        assert_eq!(n.to_bytes().unwrap().len(), 4 + 4 + 2 + 6 + 4);
        let b = Packet::BwReport(BwReport {
            timestamp_ms: 0,
            bandwidth_bps: 0,
        });
        assert_eq!(b.to_bytes().unwrap().len(), 4 + 8 + 4 + 4);
    }

    #[test]
    fn any_flipped_bit_is_detected() {
        let bytes = Packet::Token(sample_token()).to_bytes().unwrap();
        for i in 0..bytes.len() * 8 {
            let mut b = bytes.clone();
            b[i / 8] ^= 1 << (i % 8);
            assert!(Packet::parse(&b).is_err(), "bit {i}");
        }
        for cut in 0..bytes.len() {
            assert!(Packet::parse(&bytes[..cut]).is_err());
        }
    }
}
