use crate::error::{Error, Result};
use crate::video::{Frame, Gop, GOP_LEN};

/// Weight of the previous GoP's tail frame at blend position `i` (1-based).
pub fn blend_weight(i: usize, n: usize) -> f32 {
    (n - i) as f32 / n as f32
}

/// Cross-fades the first `n` frames of `curr` from the tail of `prev`.
///
/// Frame `i` (1-based) becomes `a * prev[9 - n + i] + (1 - a) * curr[i]`
/// with `a = (n - i) / n`, so frame `n` is left untouched.
pub fn blend_boundary(prev: &Gop, curr: &Gop, n: usize) -> Result<Gop> {
    if n == 0 || n > GOP_LEN {
        return Err(Error::InvalidParameter(format!(
            "blend width must be in 1..={GOP_LEN}, got {n}"
        )));
    }
    if prev.dims() != curr.dims() {
        return Err(Error::DimensionMismatch(format!(
            "previous GoP {:?} vs current {:?}",
            prev.dims(),
            curr.dims()
        )));
    }
    let mut frames = curr.frames().to_vec();
    for i in 1..=n {
        let a = blend_weight(i, n);
        if a == 0.0 {
            continue;
        }
        let tail = prev.frame(GOP_LEN - n + i - 1);
        let head = &curr.frames()[i - 1];
        let mixed: Vec<f32> = tail
            .samples()
            .iter()
            .zip(head.samples())
            .map(|(p, c)| a * p + (1.0 - a) * c)
            .collect();
        let (w, h) = head.dims();
        frames[i - 1] = Frame::from_clamped(w, h, head.index(), mixed)?;
    }
    Gop::new(curr.id(), frames, curr.scale())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::boundary_flicker;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gop(v: impl Fn(usize) -> f32) -> Gop {
        Gop::new(0, (0..9).map(|i| Frame::filled(4, 4, i as u64, v(i)).unwrap()).collect(), 1).unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(blend_weight(1, 2), 0.5);
        assert_eq!(blend_weight(2, 2), 0.0);
    }

    #[test]
    fn n2_mixes_first_and_keeps_second() {
        let prev = gop(|_| 0.0);
        let curr = gop(|_| 1.0);
        let b = blend_boundary(&prev, &curr, 2).unwrap();
        assert!(b.frame(0).samples().iter().all(|s| *s == 0.5));
        assert_eq!(b.frame(1), curr.frame(1));
        assert_eq!(&b.frames()[2..], &curr.frames()[2..]);
    }

    #[test]
    fn identity_when_boundary_matches() {
        let prev = gop(|i| if i >= 7 { 0.3 } else { 0.9 });
        let curr = gop(|_| 0.3);
        let b = blend_boundary(&prev, &curr, 2).unwrap();
        assert_eq!(b, curr);
        assert_eq!(boundary_flicker(&prev, &b, 2).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_width() {
        let g = gop(|_| 0.0);
        assert!(blend_boundary(&g, &g, 10).is_err());
        assert!(blend_boundary(&g, &g, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn never_increases_flicker(seed in 0u64..300, n in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mk = || Gop::new(0, (0..9).map(|i| Frame::from_fn(5, 3, i, |_, _, _| rng.gen()).unwrap()).collect(), 1).unwrap();
            let prev = mk();
            let curr = mk();
            let blended = blend_boundary(&prev, &curr, n).unwrap();
            let before = boundary_flicker(&prev, &curr, n).unwrap();
            let after = boundary_flicker(&prev, &blended, n).unwrap();
            proptest::prop_assert!(after <= before + 1e-9);
            for f in blended.frames() {
                proptest::prop_assert!(f.samples().iter().all(|s| (0.0..=1.0).contains(s)));
            }
        }
    }
}
