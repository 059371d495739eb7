use crate::error::{Error, Result};
use crate::video::{Frame, Gop, CHANNELS};

fn check_factor(s: u8) -> Result<usize> {
    match s {
        2 | 3 => Ok(s as usize),
        _ => Err(Error::InvalidParameter(format!("scale factor must be 2 or 3, got {s}"))),
    }
}

/// Working resolution for a frame of `dims` downscaled by `s` (edge-padded).
pub fn scaled_dims(dims: (usize, usize), s: u8) -> (usize, usize) {
    let s = s.max(1) as usize;
    (dims.0.div_ceil(s), dims.1.div_ceil(s))
}

/// `s x s` box-filter downscale. Frames whose sides are not multiples of `s`
/// are padded by edge replication first.
pub fn downscale_frame(f: &Frame, s: u8) -> Result<Frame> {
    let s = check_factor(s)?;
    let (w, h) = f.dims();
    let (ow, oh) = (w.div_ceil(s), h.div_ceil(s));
    let norm = 1.0 / (s * s) as f32;
    let mut out = Vec::with_capacity(ow * oh * CHANNELS);
    for c in 0..CHANNELS {
        let plane = f.plane(c);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f32;
                for dy in 0..s {
                    let y = (oy * s + dy).min(h - 1);
                    for dx in 0..s {
                        let x = (ox * s + dx).min(w - 1);
                        acc += plane[y * w + x];
                    }
                }
                out.push(acc * norm);
            }
        }
    }
    Frame::from_clamped(ow, oh, f.index(), out)
}

/// Restores a working-resolution frame to display resolution.
///
/// Learned super-resolution can be dropped in behind this trait.
pub trait Upscaler: Send + Sync {
    fn upscale(&self, f: &Frame, s: u8) -> Result<Frame>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BilinearUpscaler;

impl Upscaler for BilinearUpscaler {
    fn upscale(&self, f: &Frame, s: u8) -> Result<Frame> {
        upscale_frame(f, s)
    }
}

/// Bilinear upscale by `s` using pixel-center alignment and clamped edges.
pub fn upscale_frame(f: &Frame, s: u8) -> Result<Frame> {
    let s = check_factor(s)?;
    let (w, h) = f.dims();
    let (ow, oh) = (w * s, h * s);
    let taps = |o: usize, n: usize| -> (usize, usize, f32) {
        let src = ((o as f32 + 0.5) / s as f32 - 0.5).clamp(0.0, (n - 1) as f32);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, src - i0 as f32)
    };
    let xs: Vec<_> = (0..ow).map(|x| taps(x, w)).collect();
    let ys: Vec<_> = (0..oh).map(|y| taps(y, h)).collect();
    let mut out = Vec::with_capacity(ow * oh * CHANNELS);
    for c in 0..CHANNELS {
        let p = f.plane(c);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Frame::from_clamped(ow, oh, f.index(), out)
}

pub fn downscale_gop(gop: &Gop, s: u8) -> Result<Gop> {
    let frames = gop
        .frames()
        .iter()
        .map(|f| downscale_frame(f, s))
        .collect::<Result<Vec<_>>>()?;
    Gop::new(gop.id(), frames, s)
}

/// Upscales every frame and crops to the original display dimensions.
pub fn upscale_gop(gop: &Gop, s: u8, display: (usize, usize), upscaler: &dyn Upscaler) -> Result<Gop> {
    let frames = gop
        .frames()
        .iter()
        .map(|f| upscaler.upscale(f, s)?.crop(display.0, display.1))
        .collect::<Result<Vec<_>>>()?;
    Gop::new(gop.id(), frames, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_preserved() {
        let f = Frame::filled(12, 9, 0, 0.3).unwrap();
        for s in [2, 3] {
            let d = downscale_frame(&f, s).unwrap();
            assert!(d.samples().iter().all(|v| (v - 0.3).abs() < 1e-6));
            let u = upscale_frame(&d, s).unwrap();
            assert!(u.samples().iter().all(|v| (v - 0.3).abs() < 1e-6));
        }
    }

    #[test]
    fn two_by_two_mean() {
        let f = Frame::new(2, 2, 0, [0.0, 0.0, 1.0, 1.0].repeat(3)).unwrap();
        let d = downscale_frame(&f, 2).unwrap();
        assert_eq!(d.dims(), (1, 1));
        assert_eq!(d.samples(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn rejects_other_factors() {
        let f = Frame::filled(4, 4, 0, 0.0).unwrap();
        assert!(downscale_frame(&f, 4).is_err());
        assert!(upscale_frame(&f, 1).is_err());
    }

    #[test]
    fn pads_by_edge_replication() {
        let f = Frame::from_fn(5, 4, 0, |x, _, _| if x == 4 { 1.0 } else { 0.0 }).unwrap();
        let d = downscale_frame(&f, 2).unwrap();
        assert_eq!(d.dims(), (3, 2));
        // last column block = replicated column 4 only
        assert_eq!(d.get(2, 0, 0), 1.0);
        assert_eq!(scaled_dims((5, 4), 2), (3, 2));
    }

    /// Hand-rolled box + bilinear oracle on a 1-pixel checkerboard.
    #[test]
    fn checkerboard_round_trip_matches_oracle() {
        let f = Frame::from_fn(64, 64, 0, |x, y, _| ((x + y) % 2) as f32).unwrap();
        let d = downscale_frame(&f, 2).unwrap();
        let u = upscale_frame(&d, 2).unwrap();
        let mut oracle_low = vec![0.0f32; 32 * 32];
        for oy in 0..32 {
            for ox in 0..32 {
                let mut s = 0.0;
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    s += ((2 * ox + dx + 2 * oy + dy) % 2) as f32;
                }
                oracle_low[oy * 32 + ox] = s / 4.0;
            }
        }
        assert!(d.plane(0).iter().zip(&oracle_low).all(|(a, b)| (a - b).abs() < 1e-6));
        assert_eq!(u.dims(), (64, 64));
        assert!(u.samples().iter().all(|v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn bilinear_interpolates_between_centers() {
        // two pixels 0 and 1, upscaled by 2 -> 0, 0.25, 0.75, 1
        let f = Frame::new(2, 1, 0, [0.0, 1.0].repeat(3)).unwrap();
        let u = upscale_frame(&f, 2).unwrap();
        let row: Vec<f32> = u.plane(0).to_vec();
        let want = [0.0, 0.25, 0.75, 1.0];
        for (a, b) in row.iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{row:?}");
        }
    }
}
