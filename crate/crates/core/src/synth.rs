//! Built-in test content so sessions and experiments need no downloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{Frame, Gop, CHANNELS, GOP_LEN};

/// Random-access frame provider.
pub trait VideoSource: Send + Sync {
    fn dims(&self) -> (usize, usize);
    fn fps(&self) -> f64;
    fn len(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Frame>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gop_count(&self) -> usize {
        self.len().div_ceil(GOP_LEN)
    }

    /// GoP `k`, padding past the end with the last frame.
    fn gop(&self, k: usize) -> Result<Gop> {
        if k >= self.gop_count() {
            return Err(Error::InvalidParameter(format!("GoP {k} beyond {} GoPs", self.gop_count())));
        }
        let last = self.len() - 1;
        let frames = (0..GOP_LEN)
            .map(|i| self.frame((k * GOP_LEN + i).min(last)).map(|f| f.with_index((k * GOP_LEN + i) as u64)))
            .collect::<Result<Vec<_>>>()?;
        Gop::new(k as u64, frames, 1)
    }
}

/// Frames held in memory, for loaded files.
#[derive(Clone, Debug)]
pub struct FrameVec {
    frames: Vec<Frame>,
    fps: f64,
}

impl FrameVec {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidParameter("video holds no frames".into()));
        };
        if frames.iter().any(|f| !f.same_dims(first)) {
            return Err(Error::DimensionMismatch("frames differ in size".into()));
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

impl VideoSource for FrameVec {
    fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    fn fps(&self) -> f64 {
        self.fps
    }

    fn len(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        self.frames
            .get(index)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("frame {index} out of range")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Content {
    /// Smooth gradient with a few flat shapes, nothing moves.
    StaticScene,
    /// Static background with one square crossing it.
    MovingSquare,
    /// Gradient under a static high-frequency noise field.
    NoiseField,
}

impl std::str::FromStr for Content {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" | "static-scene" => Ok(Content::StaticScene),
            "square" | "moving-square" => Ok(Content::MovingSquare),
            "noise" | "noise-field" => Ok(Content::NoiseField),
            _ => Err(Error::InvalidParameter(format!("unknown content {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticVideo {
    content: Content,
    width: usize,
    height: usize,
    fps: f64,
    frames: usize,
    background: Frame,
    square: Square,
}

#[derive(Clone, Copy, Debug)]
struct Square {
    size: usize,
    x0: f64,
    y0: f64,
    vx: f64,
    vy: f64,
    color: [f32; 3],
}

impl SyntheticVideo {
    pub fn new(content: Content, width: usize, height: usize, fps: f64, frames: usize, seed: u64) -> Result<Self> {
        if width == 0 || height == 0 || !(fps > 0.0) {
            return Err(Error::InvalidParameter(format!("synthetic video {width}x{height} at {fps} fps")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background = match content {
            Content::StaticScene => scene(width, height, &mut rng)?,
            Content::MovingSquare => gradient(width, height)?,
            Content::NoiseField => noisy(width, height, &mut rng)?,
        };
        let size = (width.min(height) / 5).max(4);
        let square = Square {
            size,
            x0: rng.gen_range(0.0..(width - size.min(width - 1)) as f64),
            y0: rng.gen_range(0.0..(height - size.min(height - 1)) as f64),
            vx: rng.gen_range(1.0..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            vy: rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            color: [rng.gen_range(0.8..1.0), rng.gen_range(0.0..0.2), rng.gen_range(0.1..0.3)],
        };
        Ok(Self {
            content,
            width,
            height,
            fps,
            frames,
            background,
            square,
        })
    }

    pub fn content(&self) -> Content {
        self.content
    }

    /// Top-left corner of the square in frame `t`, bouncing off the edges.
    fn square_at(&self, t: usize) -> (usize, usize) {
        let s = self.square;
        let bounce = |start: f64, v: f64, span: usize| -> usize {
            let span = span.saturating_sub(s.size).max(1) as f64;
            let p = (start + v * t as f64).rem_euclid(2.0 * span);
            (if p > span { 2.0 * span - p } else { p }) as usize
        };
        (bounce(s.x0, s.vx, self.width), bounce(s.y0, s.vy, self.height))
    }
}

impl VideoSource for SyntheticVideo {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn fps(&self) -> f64 {
        self.fps
    }

    fn len(&self) -> usize {
        self.frames
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        if index >= self.frames {
            return Err(Error::InvalidParameter(format!("frame {index} out of range")));
        }
        if self.content != Content::MovingSquare {
            return Ok(self.background.clone().with_index(index as u64));
        }
        let (w, h) = (self.width, self.height);
        let (sx, sy) = self.square_at(index);
        let mut s = self.background.samples().to_vec();
        for c in 0..CHANNELS {
            for y in sy..(sy + self.square.size).min(h) {
                for x in sx..(sx + self.square.size).min(w) {
                    s[(c * h + y) * w + x] = self.square.color[c];
                }
            }
        }
        Frame::new(w, h, index as u64, s)
    }
}

fn gradient(w: usize, h: usize) -> Result<Frame> {
    Frame::from_fn(w, h, 0, |x, y, c| {
        let u = x as f32 / w as f32;
        let v = y as f32 / h as f32;
        match c {
            0 => 0.2 + 0.5 * u,
            1 => 0.3 + 0.4 * v,
            _ => 0.6 - 0.3 * u * v,
        }
    })
}

fn scene(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Frame> {
    let base = gradient(w, h)?;
    let mut s = base.into_samples();
    for _ in 0..6 {
        let rw = rng.gen_range(w / 10..w / 3).max(2);
        let rh = rng.gen_range(h / 10..h / 3).max(2);
        let x0 = rng.gen_range(0..w - rw.min(w - 1));
        let y0 = rng.gen_range(0..h - rh.min(h - 1));
        let circle = rng.gen_bool(0.5);
        let color: [f32; 3] = [rng.gen(), rng.gen(), rng.gen()];
        for y in y0..(y0 + rh).min(h) {
            for x in x0..(x0 + rw).min(w) {
                if circle {
                    let dx = (x - x0) as f32 / rw as f32 - 0.5;
                    let dy = (y - y0) as f32 / rh as f32 - 0.5;
                    if dx * dx + dy * dy > 0.25 {
                        continue;
                    }
                }
                for (c, v) in color.iter().enumerate() {
                    s[(c * h + y) * w + x] = *v;
                }
            }
        }
    }
    Frame::new(w, h, 0, s)
}

fn noisy(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Frame> {
    let base = gradient(w, h)?;
    let s = base.into_samples().into_iter().map(|v| v + rng.gen_range(-0.15f32..0.15)).collect();
    Frame::from_clamped(w, h, 0, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = SyntheticVideo::new(Content::MovingSquare, 64, 48, 30.0, 20, 5).unwrap();
        let b = SyntheticVideo::new(Content::MovingSquare, 64, 48, 30.0, 20, 5).unwrap();
        let c = SyntheticVideo::new(Content::MovingSquare, 64, 48, 30.0, 20, 6).unwrap();
        assert_eq!(a.frame(7).unwrap(), b.frame(7).unwrap());
        assert_ne!(a.frame(7).unwrap(), c.frame(7).unwrap());
    }

    #[test]
    fn square_moves_background_stays() {
        let v = SyntheticVideo::new(Content::MovingSquare, 96, 64, 30.0, 30, 1).unwrap();
        let (f0, f9) = (v.frame(0).unwrap(), v.frame(9).unwrap());
        let changed = f0.samples().iter().zip(f9.samples()).filter(|(a, b)| a != b).count();
        assert!(changed > 0 && changed < f0.samples().len() / 4);
        let s = SyntheticVideo::new(Content::StaticScene, 96, 64, 30.0, 30, 1).unwrap();
        assert_eq!(s.frame(0).unwrap().samples(), s.frame(29).unwrap().samples());
    }

    #[test]
    fn gops_pad_the_tail() {
        let v = SyntheticVideo::new(Content::NoiseField, 16, 16, 30.0, 10, 0).unwrap();
        assert_eq!(v.gop_count(), 2);
        let g = v.gop(1).unwrap();
        assert_eq!(g.frame(8).samples(), v.frame(9).unwrap().samples());
        assert!(v.gop(2).is_err());
    }
}
