use crate::error::{Error, Result};

/// Number of color channels carried by every frame (RGB).
pub const CHANNELS: usize = 3;

/// Frames per group of pictures: one I frame followed by eight P frames.
pub const GOP_LEN: usize = 9;

/// An RGB frame with samples normalized to `[0, 1]`.
///
/// Samples are stored planar: all of channel 0 row-major, then channel 1,
/// then channel 2. The flat index of `(x, y, c)` is `(c * height + y) * width + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    index: u64,
    samples: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, index: u64, samples: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width * height * CHANNELS;
        if samples.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} frame needs {expected} samples, got {}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || **s < 0.0 || **s > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            index,
            samples,
        })
    }

    /// Builds a frame from samples that are clamped into range first.
    pub fn from_clamped(width: usize, height: usize, index: u64, mut samples: Vec<f32>) -> Result<Self> {
        for s in &mut samples {
            *s = if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) };
        }
        Self::new(width, height, index, samples)
    }

    pub fn filled(width: usize, height: usize, index: u64, value: f32) -> Result<Self> {
        Self::new(width, height, index, vec![value; width * height * CHANNELS])
    }

    /// Builds a frame by evaluating `f(x, y, c)`; results are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        index: u64,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * CHANNELS);
        for c in 0..CHANNELS {
            for y in 0..height {
                for x in 0..width {
                    samples.push(f(x, y, c));
                }
            }
        }
        Self::from_clamped(width, height, index, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.samples[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.samples[(c * self.height + y) * self.width + x]
    }

    /// Keeps the top-left `width x height` region.
    pub fn crop(&self, width: usize, height: usize) -> Result<Self> {
        if width > self.width || height > self.height {
            return Err(Error::DimensionMismatch(format!(
                "cannot crop {}x{} to {width}x{height}",
                self.width, self.height
            )));
        }
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        let mut samples = Vec::with_capacity(width * height * CHANNELS);
        for c in 0..CHANNELS {
            for y in 0..height {
                let row = (c * self.height + y) * self.width;
                samples.extend_from_slice(&self.samples[row..row + width]);
            }
        }
        Self::new(width, height, self.index, samples)
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_dims(&self, other: &Frame) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

/// A group of nine frames sharing dimensions, coded as one I/P unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Gop {
    id: u64,
    frames: Vec<Frame>,
    scale: u8,
}

impl Gop {
    pub fn new(id: u64, frames: Vec<Frame>, scale: u8) -> Result<Self> {
        if frames.len() != GOP_LEN {
            return Err(Error::InvalidParameter(format!(
                "a GoP holds exactly {GOP_LEN} frames, got {}",
                frames.len()
            )));
        }
        if !(1..=3).contains(&scale) {
            return Err(Error::InvalidParameter(format!(
                "scale must be 1, 2 or 3, got {scale}"
            )));
        }
        let first = &frames[0];
        for f in &frames[1..] {
            first.check_same_dims(f)?;
        }
        Ok(Self { id, frames, scale })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn scale(&self) -> u8 {
        self.scale
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn with_scale(mut self, scale: u8) -> Self {
        self.scale = scale;
        self
    }
}

/// Splits a frame sequence into consecutive GoPs of nine frames.
///
/// A short tail is padded by repeating the final frame; callers keep the
/// original length (see [`crate::video::StreamMeta`]) to discard padding.
pub fn segment_gops(frames: &[Frame]) -> Result<Vec<Gop>> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidParameter("cannot segment an empty frame sequence".into()));
    };
    for f in frames {
        first.check_same_dims(f)?;
    }
    let mut gops = Vec::with_capacity(frames.len().div_ceil(GOP_LEN));
    for (id, chunk) in frames.chunks(GOP_LEN).enumerate() {
        let mut group = chunk.to_vec();
        let last = chunk[chunk.len() - 1].clone();
        while group.len() < GOP_LEN {
            group.push(last.clone());
        }
        gops.push(Gop::new(id as u64, group, 1)?);
    }
    Ok(gops)
}

/// Concatenates GoPs back into a frame sequence, dropping tail padding.
pub fn concat_gops(gops: &[Gop], original_len: usize) -> Vec<Frame> {
    gops.iter()
        .flat_map(|g| g.frames().iter().cloned())
        .take(original_len)
        .collect()
}
