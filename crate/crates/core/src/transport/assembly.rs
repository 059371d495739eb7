use crate::codec::{TokenKind, TokenMatrix};
use crate::error::Result;
use crate::residual::SparseResidual;

use super::packetize::{residual_from_packet, MatrixAssembler, ReassemblyStats};
use super::wire::{ResidualPacket, TokenPacket};

/// Retransmission trigger and row-counting mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPolicyConfig {
    /// Loss fraction above which one Nack round is attempted.
    pub nack_threshold: f64,
    /// Count I and P rows together; otherwise the worse matrix decides.
    pub joint: bool,
}

impl Default for LossPolicyConfig {
    fn default() -> Self {
        Self {
            nack_threshold: 0.5,
            joint: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LossAction {
    /// Decode now with zero-fill; `skip_residual` when no residual arrived.
    Decode { skip_residual: bool },
    Nack(Vec<(TokenKind, u16)>),
}

/// Receiver-side state for one GoP.
#[derive(Clone, Debug)]
pub struct GopAssembly {
    gop_id: u64,
    scale: u8,
    i: MatrixAssembler,
    p: MatrixAssembler,
    residual: Option<ResidualPacket>,
    residual_seen: usize,
    first_arrival_ms: u64,
    deadline_ms: u64,
    playout_ms: u64,
    nacked: bool,
}

impl GopAssembly {
    /// `deadline = first_arrival + playout_delay - rtt`, the last moment a Nack can still pay off.
    pub fn new(
        gop_id: u64,
        scale: u8,
        expected: (usize, usize, usize),
        first_arrival_ms: u64,
        playout_delay_ms: u64,
        rtt_ms: u64,
    ) -> Self {
        let playout_ms = first_arrival_ms + playout_delay_ms;
        Self {
            gop_id,
            scale,
            i: MatrixAssembler::new(TokenKind::I, expected, gop_id),
            p: MatrixAssembler::new(TokenKind::P, expected, gop_id),
            residual: None,
            residual_seen: 0,
            first_arrival_ms,
            deadline_ms: playout_ms.saturating_sub(rtt_ms).max(first_arrival_ms),
            playout_ms,
            nacked: false,
        }
    }

    pub fn gop_id(&self) -> u64 {
        self.gop_id
    }

    pub fn scale(&self) -> u8 {
        self.scale
    }

    pub fn first_arrival_ms(&self) -> u64 {
        self.first_arrival_ms
    }

    pub fn deadline_ms(&self) -> u64 {
        self.deadline_ms
    }

    pub fn playout_ms(&self) -> u64 {
        self.playout_ms
    }

    pub fn nacked(&self) -> bool {
        self.nacked
    }

    pub fn mark_nacked(&mut self) {
        self.nacked = true;
    }

    /// Returns true when the packet added a row not seen before.
    pub fn insert_token(&mut self, p: &TokenPacket) -> bool {
        if p.scale != self.scale {
            return false;
        }
        match p.kind {
            TokenKind::I => self.i.insert(p),
            TokenKind::P => self.p.insert(p),
        }
    }

    pub fn insert_residual(&mut self, p: ResidualPacket) -> bool {
        self.residual_seen += 1;
        if self.residual.is_some() || p.gop_id as u64 != self.gop_id {
            return false;
        }
        self.residual = Some(p);
        true
    }

    pub fn expected_rows(&self) -> usize {
        self.i.matrix().rows()
    }

    pub fn received_rows(&self, kind: TokenKind) -> usize {
        match kind {
            TokenKind::I => self.i.received_rows(),
            TokenKind::P => self.p.received_rows(),
        }
    }

    pub fn missing_rows(&self) -> Vec<(TokenKind, u16)> {
        self.i
            .missing_rows()
            .map(|r| (TokenKind::I, r as u16))
            .chain(self.p.missing_rows().map(|r| (TokenKind::P, r as u16)))
            .collect()
    }

    pub fn loss_fraction(&self, joint: bool) -> f64 {
        let rows = self.expected_rows();
        if rows == 0 {
            return 0.0;
        }
        let miss_i = rows - self.i.received_rows();
        let miss_p = rows - self.p.received_rows();
        if joint {
            (miss_i + miss_p) as f64 / (2 * rows) as f64
        } else {
            miss_i.max(miss_p) as f64 / rows as f64
        }
    }

    pub fn has_residual(&self) -> bool {
        self.residual.is_some()
    }

    pub fn is_complete(&self) -> bool {
        self.i.received_rows() == self.expected_rows()
            && self.p.received_rows() == self.expected_rows()
            && self.residual.is_some()
    }

    pub fn stats(&self) -> ReassemblyStats {
        let (a, b) = (self.i.stats(), self.p.stats());
        ReassemblyStats {
            accepted: a.accepted + b.accepted,
            duplicates: a.duplicates + b.duplicates,
            corrupt: a.corrupt + b.corrupt,
        }
    }

    pub fn matrices(&self) -> (&TokenMatrix, &TokenMatrix) {
        (self.i.matrix(), self.p.matrix())
    }

    /// Decoded residual, if one arrived and parses.
    pub fn residual(&self) -> Option<Result<SparseResidual>> {
        self.residual.as_ref().map(residual_from_packet)
    }
}

/// Decides between decoding now and asking for a retransmission.
///
/// A Nack is issued at most once per GoP and only while `now` has not passed
/// the assembly deadline; every other outcome decodes with zero-fill. A
/// missing residual never delays decoding.
pub fn loss_policy(a: &GopAssembly, now_ms: u64, cfg: &LossPolicyConfig) -> LossAction {
    if !a.nacked && now_ms <= a.deadline_ms && a.loss_fraction(cfg.joint) > cfg.nack_threshold {
        return LossAction::Nack(a.missing_rows());
    }
    LossAction::Decode {
        skip_residual: !a.has_residual(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::packetize::packetize_tokens;

    fn assembly_with(rows_i: &[u16], rows_p: &[u16], residual: bool) -> GopAssembly {
        let m = TokenMatrix::from_parts(TokenKind::I, 8, 4, 3, vec![1.0; 96], vec![true; 32], 0).unwrap();
        let mp = TokenMatrix::from_parts(TokenKind::P, 8, 4, 3, vec![1.0; 96], vec![true; 32], 0).unwrap();
        let mut a = GopAssembly::new(0, 2, (8, 4, 3), 1000, 120, 40);
        for p in packetize_tokens(&m, 2).unwrap().iter().filter(|p| rows_i.contains(&p.row)) {
            a.insert_token(p);
        }
        for p in packetize_tokens(&mp, 2).unwrap().iter().filter(|p| rows_p.contains(&p.row)) {
            a.insert_token(p);
        }
        if residual {
            a.insert_residual(ResidualPacket {
                gop_id: 0,
                scale: 2,
                theta: 0.02,
                quant_step: 1.0 / 127.0,
                window_length: 9,
                width: 32,
                height: 64,
                channels: 3,
                payload: vec![],
            });
        }
        a
    }

    #[test]
    fn quarter_loss_decodes() {
        let a = assembly_with(&[0, 1, 2, 3, 4, 5], &[0, 1, 2, 3, 4, 5], true);
        assert_eq!(a.loss_fraction(true), 0.25);
        assert_eq!(loss_policy(&a, 1000, &LossPolicyConfig::default()), LossAction::Decode { skip_residual: false });
    }

    #[test]
    fn heavy_loss_nacks_once_before_deadline() {
        let mut a = assembly_with(&[0, 1, 2], &[0, 1, 2], true);
        assert_eq!(a.deadline_ms(), 1080);
        let cfg = LossPolicyConfig::default();
        match loss_policy(&a, 1010, &cfg) {
            LossAction::Nack(rows) => {
                assert_eq!(rows.len(), 10);
                assert_eq!(rows[0], (TokenKind::I, 3));
                assert_eq!(rows[9], (TokenKind::P, 7));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(loss_policy(&a, 1081, &cfg), LossAction::Decode { skip_residual: false });
        a.mark_nacked();
        assert_eq!(loss_policy(&a, 1010, &cfg), LossAction::Decode { skip_residual: false });
    }

    #[test]
    fn lost_residual_skips_without_waiting() {
        let all: Vec<u16> = (0..8).collect();
        let a = assembly_with(&all, &all, false);
        assert!(!a.is_complete());
        assert_eq!(loss_policy(&a, 1000, &LossPolicyConfig::default()), LossAction::Decode { skip_residual: true });
    }

    #[test]
    fn separate_counting_uses_worse_matrix() {
        let all: Vec<u16> = (0..8).collect();
        let a = assembly_with(&all, &[0, 1, 2], true);
        assert!(a.loss_fraction(true) < 0.5);
        assert!(a.loss_fraction(false) > 0.5);
        let cfg = LossPolicyConfig { joint: false, ..Default::default() };
        assert!(matches!(loss_policy(&a, 1000, &cfg), LossAction::Nack(_)));
    }
}
