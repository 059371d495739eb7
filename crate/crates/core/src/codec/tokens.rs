use crate::error::{Error, Result};

/// Spatial compression of the tokenizer: one token per 8x8 pixel block.
pub const SPATIAL_FACTOR: usize = 8;
/// Temporal compression applied to the eight P frames of a GoP.
pub const TEMPORAL_FACTOR: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Spatially compressed reference frame.
    I,
    /// Spatio-temporally compressed predicted frames.
    P,
}

/// An `rows x cols x channels` latent grid with a per-token validity mask.
///
/// Invalid tokens always hold zero in every channel.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix {
    kind: TokenKind,
    rows: usize,
    cols: usize,
    channels: usize,
    values: Vec<f32>,
    mask: Vec<bool>,
    gop_id: u64,
}

impl TokenMatrix {
    /// All-zero matrix with every token marked invalid.
    pub fn empty(kind: TokenKind, rows: usize, cols: usize, channels: usize, gop_id: u64) -> Self {
        Self {
            kind,
            rows,
            cols,
            channels,
            values: vec![0.0; rows * cols * channels],
            mask: vec![false; rows * cols],
            gop_id,
        }
    }

    pub fn from_parts(
        kind: TokenKind,
        rows: usize,
        cols: usize,
        channels: usize,
        values: Vec<f32>,
        mask: Vec<bool>,
        gop_id: u64,
    ) -> Result<Self> {
        if values.len() != rows * cols * channels || mask.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols}x{channels} matrix given {} values and {} mask bits",
                values.len(),
                mask.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("token values must be finite".into()));
        }
        let mut m = Self {
            kind,
            rows,
            cols,
            channels,
            values,
            mask,
            gop_id,
        };
        for pos in 0..rows * cols {
            if !m.mask[pos] && m.values[pos * channels..(pos + 1) * channels].iter().any(|v| *v != 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "masked-out token {pos} carries non-zero values"
                )));
            }
        }
        m.values.iter_mut().for_each(|v| {
            if *v == 0.0 {
                *v = 0.0; // normalizes -0.0
            }
        });
        Ok(m)
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.channels)
    }

    pub fn gop_id(&self) -> u64 {
        self.gop_id
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.cols + col]
    }

    pub fn token(&self, row: usize, col: usize) -> &[f32] {
        let at = (row * self.cols + col) * self.channels;
        &self.values[at..at + self.channels]
    }

    /// Stores a token and marks it valid.
    pub fn set_token(&mut self, row: usize, col: usize, value: &[f32]) {
        debug_assert_eq!(value.len(), self.channels);
        let at = (row * self.cols + col) * self.channels;
        self.values[at..at + self.channels].copy_from_slice(value);
        self.mask[row * self.cols + col] = true;
    }

    /// Zeroes a token and marks it invalid.
    pub fn clear_token(&mut self, row: usize, col: usize) {
        let at = (row * self.cols + col) * self.channels;
        self.values[at..at + self.channels].fill(0.0);
        self.mask[row * self.cols + col] = false;
    }

    pub fn clear_row(&mut self, row: usize) {
        for col in 0..self.cols {
            self.clear_token(row, col);
        }
    }

    pub fn row_mask(&self, row: usize) -> &[bool] {
        &self.mask[row * self.cols..(row + 1) * self.cols]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Copy with every position flagged `true` in `drop` zeroed and invalidated.
    pub fn with_dropped(&self, drop: &[bool]) -> Result<Self> {
        if drop.len() != self.mask.len() {
            return Err(Error::DimensionMismatch(format!(
                "drop mask of {} entries for {}x{} tokens",
                drop.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = self.clone();
        for (pos, d) in drop.iter().enumerate() {
            if *d {
                out.clear_token(pos / self.cols, pos % self.cols);
            }
        }
        Ok(out)
    }

    pub fn set_gop_id(&mut self, gop_id: u64) {
        self.gop_id = gop_id;
    }
}

/// Parameters shared by encoder and decoder for one stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodecConfig {
    /// Latent channels per token; the DCT tokenizer keeps `channels / 3`
    /// coefficients per color channel.
    pub channels: usize,
    /// Resolution downsample factor applied before encoding.
    pub scale: u8,
    /// Frames blended across each GoP boundary.
    pub blend_width: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            channels: 12,
            scale: 2,
            blend_width: 2,
        }
    }
}

impl CodecConfig {
    pub fn with_scale(mut self, scale: u8) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || !self.channels.is_multiple_of(3) || self.channels > 3 * 64 {
            return Err(Error::InvalidParameter(format!(
                "channels must be a positive multiple of 3 up to 192, got {}",
                self.channels
            )));
        }
        if !matches!(self.scale, 2 | 3) {
            return Err(Error::InvalidParameter(format!(
                "scale must be 2 or 3, got {}",
                self.scale
            )));
        }
        if !(1..=8).contains(&self.blend_width) {
            return Err(Error::InvalidParameter(format!(
                "blend width must be in 1..=8, got {}",
                self.blend_width
            )));
        }
        Ok(())
    }

    /// Token grid for frames of the given working resolution.
    pub fn token_grid(width: usize, height: usize) -> (usize, usize) {
        (height.div_ceil(SPATIAL_FACTOR), width.div_ceil(SPATIAL_FACTOR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_positions_must_be_zero() {
        let err = TokenMatrix::from_parts(TokenKind::P, 1, 2, 1, vec![1.0, 2.0], vec![true, false], 0);
        assert!(err.is_err());
        let ok = TokenMatrix::from_parts(TokenKind::P, 1, 2, 1, vec![1.0, -0.0], vec![true, false], 0).unwrap();
        assert_eq!(ok.values()[1].to_bits(), 0.0f32.to_bits());
    }

    #[test]
    fn drop_zeroes_and_invalidates() {
        let mut m = TokenMatrix::empty(TokenKind::P, 2, 2, 3, 7);
        for r in 0..2 {
            for c in 0..2 {
                m.set_token(r, c, &[1.0, 2.0, 3.0]);
            }
        }
        let d = m.with_dropped(&[false, true, false, false]).unwrap();
        assert!(!d.is_valid(0, 1));
        assert_eq!(d.token(0, 1), &[0.0, 0.0, 0.0]);
        assert_eq!(d.valid_count(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(CodecConfig::default().validate().is_ok());
        assert!(CodecConfig { channels: 10, ..Default::default() }.validate().is_err());
        assert!(CodecConfig::default().with_scale(4).validate().is_err());
        assert!(CodecConfig { blend_width: 9, ..Default::default() }.validate().is_err());
        assert_eq!(CodecConfig::token_grid(180, 120), (15, 23));
    }
}
