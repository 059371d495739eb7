use super::frame::{Frame, Gop, GOP_LEN};
use crate::error::{Error, Result};

/// PSNR reported for bit-identical frames.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Pixel norm used when comparing boundary frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FlickerNorm {
    /// Mean absolute difference per sample.
    #[default]
    L1,
    /// Root mean squared difference per sample.
    L2,
}

pub fn mse(reference: &Frame, test: &Frame) -> Result<f64> {
    reference.check_same_dims(test)?;
    Ok(sum_sq(reference.samples(), test.samples()) / reference.samples().len() as f64)
}

fn sum_sq(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (*x - *y) as f64;
            d * d
        })
        .sum()
}

fn sum_abs(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs() as f64).sum()
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr(reference: &Frame, test: &Frame) -> Result<f64> {
    mse(reference, test).map(psnr_from_mse)
}

/// Mean squared error pooled over every sample of two equal-length sequences.
pub fn sequence_mse(reference: &[Frame], test: &[Frame]) -> Result<f64> {
    if reference.len() != test.len() || reference.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "sequence lengths {} and {}",
            reference.len(),
            test.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, t) in reference.iter().zip(test) {
        r.check_same_dims(t)?;
        total += sum_sq(r.samples(), t.samples());
        count += r.samples().len();
    }
    Ok(total / count as f64)
}

/// Average per-sample distance between two equally long sets of frames.
pub fn frame_set_distance(a: &[Frame], b: &[Frame], norm: FlickerNorm) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "frame sets of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        x.check_same_dims(y)?;
        let n = x.samples().len() as f64;
        acc += match norm {
            FlickerNorm::L1 => sum_abs(x.samples(), y.samples()) / n,
            FlickerNorm::L2 => (sum_sq(x.samples(), y.samples()) / n).sqrt(),
        };
    }
    Ok(acc / a.len() as f64)
}

/// Pixel loss across a GoP boundary: the first `n` frames of `curr` against
/// the last `n` frames of `prev`, averaged over frames and samples.
pub fn boundary_flicker(prev: &Gop, curr: &Gop, n: usize) -> Result<f64> {
    boundary_flicker_with(prev, curr, n, FlickerNorm::L1)
}

pub fn boundary_flicker_with(prev: &Gop, curr: &Gop, n: usize, norm: FlickerNorm) -> Result<f64> {
    if n == 0 || n > GOP_LEN {
        return Err(Error::InvalidParameter(format!(
            "blend width must be in 1..={GOP_LEN}, got {n}"
        )));
    }
    let tail = &prev.frames()[GOP_LEN - n..];
    let head = &curr.frames()[..n];
    frame_set_distance(head, tail, norm)
}

/// Mean absolute difference between each pair of consecutive frames.
pub fn consistency_delta(frames: &[Frame]) -> Result<Vec<f64>> {
    frames
        .windows(2)
        .map(|w| {
            w[0].check_same_dims(&w[1])?;
            Ok(sum_abs(w[0].samples(), w[1].samples()) / w[0].samples().len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub psnr_db: f64,
    pub mse: f64,
    /// One value per GoP boundary of the reconstruction.
    pub boundary_flicker: Vec<f64>,
    /// One value per consecutive-frame transition of the reconstruction.
    pub consistency_delta: Vec<f64>,
}

impl QualityReport {
    pub fn measure(reference: &[Gop], recon: &[Gop], blend_width: usize) -> Result<Self> {
        let ref_frames: Vec<Frame> = reference.iter().flat_map(|g| g.frames().iter().cloned()).collect();
        let rec_frames: Vec<Frame> = recon.iter().flat_map(|g| g.frames().iter().cloned()).collect();
        let mse = sequence_mse(&ref_frames, &rec_frames)?;
        let boundary_flicker = recon
            .windows(2)
            .map(|w| boundary_flicker(&w[0], &w[1], blend_width))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            psnr_db: psnr_from_mse(mse),
            mse,
            boundary_flicker,
            consistency_delta: consistency_delta(&rec_frames)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat(v: f32) -> Frame {
        Frame::filled(8, 8, 0, v).unwrap()
    }

    fn gop_of(frames: Vec<Frame>) -> Gop {
        Gop::new(0, frames, 1).unwrap()
    }

    fn random_gop(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Gop {
        gop_of(
            (0..9)
                .map(|i| Frame::from_fn(w, h, i, |_, _, _| rng.gen::<f32>()).unwrap())
                .collect(),
        )
    }

    #[test]
    fn psnr_examples() {
        assert_eq!(psnr(&flat(0.3), &flat(0.3)).unwrap(), PSNR_CAP_DB);
        assert!((psnr(&flat(0.0), &flat(1.0)).unwrap() - 0.0).abs() < 1e-12);
        assert!((psnr(&flat(0.0), &flat(0.5)).unwrap() - 6.0206).abs() < 1e-4);
        let other = Frame::filled(4, 8, 0, 0.0).unwrap();
        assert!(psnr(&flat(0.0), &other).is_err());
    }

    #[test]
    fn flicker_zero_and_full_scale() {
        let a = gop_of(vec![flat(0.4); 9]);
        assert_eq!(boundary_flicker(&a, &a, 2).unwrap(), 0.0);
        let prev = gop_of(vec![flat(0.0); 9]);
        let curr = gop_of(vec![flat(1.0); 9]);
        assert_eq!(boundary_flicker(&prev, &curr, 1).unwrap(), 1.0);
        assert!(boundary_flicker(&prev, &curr, 0).is_err());
        assert!(boundary_flicker(&prev, &curr, 10).is_err());
    }

    #[test]
    fn flicker_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prev = random_gop(&mut rng, 6, 5);
        let curr = random_gop(&mut rng, 6, 5);
        // Oracle: walk every sample of both boundary frame pairs.
        let mut total = 0.0f64;
        let mut count = 0usize;
        for i in 0..2 {
            let a = curr.frame(i);
            let b = prev.frame(7 + i);
            for c in 0..3 {
                for y in 0..5 {
                    for x in 0..6 {
                        total += (a.get(x, y, c) as f64 - b.get(x, y, c) as f64).abs();
                        count += 1;
                    }
                }
            }
        }
        let expected = total / count as f64;
        assert!((boundary_flicker(&prev, &curr, 2).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn consistency_of_constant_sequence_is_zero() {
        let d = consistency_delta(&[flat(0.2), flat(0.2), flat(0.7)]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 0.5).abs() < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn flicker_symmetric_and_triangle(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mk = |rng: &mut ChaCha8Rng| -> Vec<Frame> {
                (0..3).map(|i| Frame::from_fn(4, 3, i, |_, _, _| rng.gen::<f32>()).unwrap()).collect()
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let ab = frame_set_distance(&a, &b, FlickerNorm::L1).unwrap();
            let ba = frame_set_distance(&b, &a, FlickerNorm::L1).unwrap();
            let bc = frame_set_distance(&b, &c, FlickerNorm::L1).unwrap();
            let ac = frame_set_distance(&a, &c, FlickerNorm::L1).unwrap();
            proptest::prop_assert!((ab - ba).abs() < 1e-12);
            proptest::prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn psnr_decreases_with_growing_error(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = Frame::from_fn(8, 8, 0, |_, _, _| 0.25 + 0.5 * rng.gen::<f32>()).unwrap();
            let mut last = f64::INFINITY;
            for k in 1..6 {
                let eps = 0.04 * k as f32;
                let noisy = Frame::from_fn(8, 8, 0, |x, y, c| base.get(x, y, c) + eps).unwrap();
                let p = psnr(&base, &noisy).unwrap();
                proptest::prop_assert!(p < last);
                last = p;
            }
        }
    }
}
