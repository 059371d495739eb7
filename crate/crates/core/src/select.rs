//! Similarity-based token importance and bandwidth-driven drop masks.
//!
//! A P token that points the same way as its co-located I token carries
//! little new information, so tokens are dropped in order of decreasing
//! cosine similarity.

use rand::seq::index::sample;
use rand::Rng;

use crate::codec::{TokenKind, TokenMatrix};
use crate::error::{Error, Result};

/// Largest drop rate [`build_drop_mask`] accepts.
pub const MAX_DROP_RATE: f64 = 0.30;
/// Ceiling on proactive dropping chosen by the rate controller.
pub const PROACTIVE_DROP_CAP: f64 = 0.25;

/// Per-location cosine similarity between P and I tokens, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMap {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
    gop_id: u64,
}

impl SimilarityMap {
    pub fn from_values(rows: usize, cols: usize, values: Vec<f32>, gop_id: u64) -> Result<Self> {
        if values.len() != rows * cols || values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "similarity map needs rows*cols entries in [-1, 1]".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            values,
            gop_id,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    pub fn gop_id(&self) -> u64 {
        self.gop_id
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0) as f32,
    }
}

/// Cosine similarity of every P token against the I token at the same place.
///
/// Two zero vectors count as fully redundant (1); one zero vector as
/// unrelated (0).
pub fn token_similarity(p: &TokenMatrix, i: &TokenMatrix) -> Result<SimilarityMap> {
    if p.kind() != TokenKind::P || i.kind() != TokenKind::I {
        return Err(Error::InvalidParameter(format!(
            "expected (P, I) matrices, got ({:?}, {:?})",
            p.kind(),
            i.kind()
        )));
    }
    if p.shape() != i.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", p.shape(), i.shape())));
    }
    let mut values = Vec::with_capacity(p.rows() * p.cols());
    for r in 0..p.rows() {
        for c in 0..p.cols() {
            values.push(cosine(p.token(r, c), i.token(r, c)));
        }
    }
    Ok(SimilarityMap {
        rows: p.rows(),
        cols: p.cols(),
        values,
        gop_id: p.gop_id(),
    })
}

/// Positions chosen for dropping, row-major, `true` = dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropMask {
    rows: usize,
    cols: usize,
    dropped: Vec<bool>,
}

impl DropMask {
    pub fn none(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            dropped: vec![false; rows * cols],
        }
    }

    pub fn from_dropped(rows: usize, cols: usize, dropped: Vec<bool>) -> Result<Self> {
        if dropped.len() != rows * cols {
            return Err(Error::DimensionMismatch("drop mask size".into()));
        }
        Ok(Self { rows, cols, dropped })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_dropped(&self, row: usize, col: usize) -> bool {
        self.dropped[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.dropped
    }

    pub fn dropped_count(&self) -> usize {
        self.dropped.iter().filter(|d| **d).count()
    }

    /// Validity mask (the complement): `true` = token kept.
    pub fn keep_mask(&self) -> Vec<bool> {
        self.dropped.iter().map(|d| !d).collect()
    }
}

/// Drops exactly `count` positions with the highest similarity; equal
/// similarities drop the earlier row-major position first.
pub fn top_k_drop_mask(sim: &SimilarityMap, count: usize) -> DropMask {
    let mut order: Vec<usize> = (0..sim.values.len()).collect();
    order.sort_by(|&a, &b| sim.values[b].total_cmp(&sim.values[a]).then(a.cmp(&b)));
    let mut dropped = vec![false; sim.values.len()];
    for &pos in order.iter().take(count) {
        dropped[pos] = true;
    }
    DropMask {
        rows: sim.rows,
        cols: sim.cols,
        dropped,
    }
}

pub fn drop_count(drop_rate: f64, tokens: usize) -> usize {
    ((drop_rate * tokens as f64).round() as usize).min(tokens)
}

/// Drop mask for a fraction of the grid, limited to the tolerated envelope.
pub fn build_drop_mask(sim: &SimilarityMap, drop_rate: f64) -> Result<DropMask> {
    if !(0.0..=MAX_DROP_RATE).contains(&drop_rate) {
        return Err(Error::InvalidParameter(format!(
            "drop rate {drop_rate} outside [0, {MAX_DROP_RATE}]"
        )));
    }
    Ok(top_k_drop_mask(sim, drop_count(drop_rate, sim.values.len())))
}

/// Uniformly random mask dropping exactly `count` positions.
pub fn random_drop_mask<R: Rng + ?Sized>(rows: usize, cols: usize, count: usize, rng: &mut R) -> DropMask {
    let n = rows * cols;
    let mut dropped = vec![false; n];
    for pos in sample(rng, n, count.min(n)).iter() {
        dropped[pos] = true;
    }
    DropMask { rows, cols, dropped }
}

/// Proactive drop rate for a bandwidth shortfall against the full token rate.
pub fn drop_rate_for_bandwidth(available_bps: f64, full_rate_bps: f64) -> f64 {
    if full_rate_bps <= 0.0 {
        return 0.0;
    }
    (1.0 - available_bps / full_rate_bps).clamp(0.0, PROACTIVE_DROP_CAP)
}
