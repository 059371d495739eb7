//! Pixel residuals against the proxy reconstruction.
//!
//! Residuals are averaged over a temporal window, thresholded, quantized to
//! signed bytes and carried as an entropy-coded dense scan in planar sample
//! order (`(c * h + y) * w + x`).

use crate::entropy;
use crate::error::{Error, Result};
use crate::video::{Frame, Gop, CHANNELS, GOP_LEN};

pub const DEFAULT_THETA: f32 = 0.02;
pub const DEFAULT_QUANT_STEP: f32 = 1.0 / 127.0;
pub const DEFAULT_WINDOW: u16 = GOP_LEN as u16;

/// Per-frame residual `x - x_hat`, one vector per frame in planar order.
pub fn compute_residual(gop: &Gop, recon: &Gop) -> Result<Vec<Vec<f64>>> {
    if gop.dims() != recon.dims() || gop.frames().len() != recon.frames().len() {
        return Err(Error::DimensionMismatch(format!(
            "residual of {:?} against {:?}",
            gop.dims(),
            recon.dims()
        )));
    }
    Ok(gop
        .frames()
        .iter()
        .zip(recon.frames())
        .map(|(x, xh)| {
            x.samples()
                .iter()
                .zip(xh.samples())
                .map(|(&a, &b)| a as f64 - b as f64)
                .collect()
        })
        .collect())
}

/// Per-sample temporal mean over the window.
pub fn aggregate_residual(window: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = window.first() else {
        return Err(Error::InvalidParameter("residual window must hold at least one frame".into()));
    };
    if window.iter().any(|r| r.len() != first.len()) {
        return Err(Error::DimensionMismatch("residual frames differ in length".into()));
    }
    let mut acc = vec![0.0f64; first.len()];
    for r in window {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let t = window.len() as f64;
    acc.iter_mut().for_each(|a| *a /= t);
    Ok(acc)
}

/// Thresholded, quantized residual for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseResidual {
    gop_id: u64,
    window_length: u16,
    theta: f32,
    quant_step: f32,
    width: usize,
    height: usize,
    channels: usize,
    entries: Vec<(u32, i8)>,
}

impl SparseResidual {
    pub fn empty(gop_id: u64, dims: (usize, usize), theta: f32, quant_step: f32, window_length: u16) -> Self {
        Self {
            gop_id,
            window_length,
            theta,
            quant_step,
            width: dims.0,
            height: dims.1,
            channels: CHANNELS,
            entries: Vec::new(),
        }
    }

    /// Builds from explicit entries, checking order, range and the threshold invariant.
    pub fn from_entries(
        gop_id: u64,
        dims: (usize, usize),
        theta: f32,
        quant_step: f32,
        window_length: u16,
        entries: Vec<(u32, i8)>,
    ) -> Result<Self> {
        let mut sr = Self::empty(gop_id, dims, theta, quant_step, window_length);
        sr.check_params()?;
        let n = sr.sample_count();
        let mut prev: Option<u32> = None;
        for &(idx, q) in &entries {
            if idx as usize >= n || prev.is_some_and(|p| idx <= p) {
                return Err(Error::CorruptPacket(format!("residual index {idx} out of order or range")));
            }
            if q == 0 || q == i8::MIN || (q as f32 * quant_step).abs() < theta {
                return Err(Error::CorruptPacket(format!("residual value {q} below threshold or out of range")));
            }
            prev = Some(idx);
        }
        sr.entries = entries;
        Ok(sr)
    }

    fn check_params(&self) -> Result<()> {
        if !(self.theta >= 0.0) || !(self.quant_step > 0.0) || !self.quant_step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta {} and quant step {} must satisfy theta >= 0, q > 0",
                self.theta, self.quant_step
            )));
        }
        if self.window_length == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("residual window and dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn gop_id(&self) -> u64 {
        self.gop_id
    }

    pub fn set_gop_id(&mut self, gop_id: u64) {
        self.gop_id = gop_id;
    }

    pub fn window_length(&self) -> u16 {
        self.window_length
    }

    pub fn theta(&self) -> f32 {
        self.theta
    }

    pub fn quant_step(&self) -> f32 {
        self.quant_step
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn sample_count(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn entries(&self) -> &[(u32, i8)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fraction of samples carrying no entry.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.entries.len() as f64 / self.sample_count() as f64
    }

    /// Dense scan up to the last non-zero entry; trailing zeros are implicit.
    pub fn to_scan(&self) -> Vec<i8> {
        let len = self.entries.last().map_or(0, |e| e.0 as usize + 1);
        let mut scan = vec![0i8; len];
        for &(i, q) in &self.entries {
            scan[i as usize] = q;
        }
        scan
    }

    /// Entropy-coded payload.
    pub fn encode_payload(&self) -> Vec<u8> {
        entropy::encode_dense(&self.to_scan()).expect("quantized values exclude -128")
    }

    pub fn decode_payload(
        bytes: &[u8],
        gop_id: u64,
        dims: (usize, usize),
        theta: f32,
        quant_step: f32,
        window_length: u16,
    ) -> Result<Self> {
        let scan = entropy::decode_dense(bytes)?;
        let entries = scan
            .iter()
            .enumerate()
            .filter(|(_, q)| **q != 0)
            .map(|(i, q)| (i as u32, *q))
            .collect();
        Self::from_entries(gop_id, dims, theta, quant_step, window_length, entries)
    }
}

/// Keeps samples with `|avg| >= theta`, quantized as `clamp(round(avg / q), -127, 127)`.
///
/// Entries whose quantized magnitude lands under `theta` (or at zero) are
/// omitted so every kept entry dequantizes to at least `theta`.
pub fn sparsify_quantize(
    avg: &[f64],
    dims: (usize, usize),
    theta: f32,
    quant_step: f32,
    gop_id: u64,
    window_length: u16,
) -> Result<SparseResidual> {
    let mut sr = SparseResidual::empty(gop_id, dims, theta, quant_step, window_length);
    sr.check_params()?;
    if avg.len() != sr.sample_count() {
        return Err(Error::DimensionMismatch(format!(
            "residual of {} samples for {}x{} frames",
            avg.len(),
            dims.0,
            dims.1
        )));
    }
    let (th, q) = (theta as f64, quant_step as f64);
    for (i, &v) in avg.iter().enumerate() {
        if v.abs() < th {
            continue;
        }
        let qv = (v / q).round().clamp(-127.0, 127.0) as i8;
        if qv != 0 && (qv as f32 * quant_step).abs() >= theta {
            sr.entries.push((i as u32, qv));
        }
    }
    Ok(sr)
}

/// Adds the dequantized residual to every frame of the window, clamped to [0, 1].
pub fn apply_residual(recon: &Gop, sr: &SparseResidual) -> Result<Gop> {
    let (w, h) = recon.dims();
    if (w, h, CHANNELS) != sr.dims() {
        return Err(Error::DimensionMismatch(format!(
            "residual {:?} for GoP {w}x{h}",
            sr.dims()
        )));
    }
    if sr.is_empty() {
        return Ok(recon.clone());
    }
    let n = w * h * CHANNELS;
    if let Some(&(bad, _)) = sr.entries.iter().find(|e| e.0 as usize >= n) {
        return Err(Error::CorruptPacket(format!("residual index {bad} beyond {n} samples")));
    }
    let frames = recon
        .frames()
        .iter()
        .map(|f| {
            let mut s = f.samples().to_vec();
            for &(i, q) in &sr.entries {
                s[i as usize] += q as f32 * sr.quant_step;
            }
            Frame::from_clamped(w, h, f.index(), s)
        })
        .collect::<Result<Vec<_>>>()?;
    Gop::new(recon.id(), frames, recon.scale())
}

/// Bit rate of an uncompressed residual stream.
pub fn raw_residual_rate(width: usize, height: usize, fps: f64, channels: usize, bit_depth: u32) -> f64 {
    width as f64 * height as f64 * channels as f64 * bit_depth as f64 * fps
}

/// Residual for a whole GoP against a reconstruction, with one window per GoP.
pub fn gop_residual(gop: &Gop, recon: &Gop, theta: f32, quant_step: f32) -> Result<SparseResidual> {
    let r = compute_residual(gop, recon)?;
    let avg = aggregate_residual(&r)?;
    sparsify_quantize(&avg, gop.dims(), theta, quant_step, gop.id(), r.len() as u16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::psnr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gop(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Gop {
        let frames = (0..GOP_LEN)
            .map(|k| Frame::from_fn(w, h, k as u64, |_, _, _| rng.gen::<f32>()).unwrap())
            .collect();
        Gop::new(0, frames, 1).unwrap()
    }

    #[test]
    fn residual_of_identity_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_gop(&mut rng, 8, 8);
        assert!(compute_residual(&g, &g).unwrap().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn residual_plus_recon_is_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_gop(&mut rng, 9, 7);
        let recon = random_gop(&mut rng, 9, 7);
        let r = compute_residual(&g, &recon).unwrap();
        for (t, f) in g.frames().iter().enumerate() {
            for (i, &x) in f.samples().iter().enumerate() {
                assert_eq!(recon.frame(t).samples()[i] as f64 + r[t][i], x as f64);
            }
        }
        let one = Gop::new(0, vec![Frame::filled(1, 1, 0, 1.0).unwrap(); 9], 1).unwrap();
        let quarter = Gop::new(0, vec![Frame::filled(1, 1, 0, 0.25).unwrap(); 9], 1).unwrap();
        assert_eq!(compute_residual(&one, &quarter).unwrap()[0][0], 0.75);
    }

    #[test]
    fn aggregate_examples() {
        let r = vec![vec![0.3, -0.1]; 5];
        assert_eq!(aggregate_residual(&r).unwrap(), vec![0.3, -0.1]);
        assert_eq!(aggregate_residual(&[vec![0.2], vec![-0.2]]).unwrap(), vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<Vec<f64>> = (0..7).map(|_| (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let avg = aggregate_residual(&w).unwrap();
        for i in 0..50 {
            let brute: f64 = (0..7).map(|t| w[t][i]).sum::<f64>() / 7.0;
            assert!((avg[i] - brute).abs() < 1e-12);
        }
        assert!(aggregate_residual(&[]).is_err());
    }

    #[test]
    fn noise_variance_falls_with_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let sigma = 0.1f64;
        for t in [2usize, 4, 8] {
            let window: Vec<Vec<f64>> = (0..t)
                .map(|_| (0..n).map(|_| 0.05 + rng.gen_range(-sigma..sigma)).collect())
                .collect();
            // uniform on [0.05 - s, 0.05 + s] has variance s^2 / 3
            let var0 = sigma * sigma / 3.0;
            let avg = aggregate_residual(&window).unwrap();
            let mean = avg.iter().sum::<f64>() / n as f64;
            let var = avg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let expect = var0 / t as f64;
            assert!((var / expect - 1.0).abs() < 0.2, "T={t}: {var} vs {expect}");
        }
    }

    #[test]
    fn sparsify_examples() {
        let q = 1.0 / 127.0;
        let sr = sparsify_quantize(&[0.05, -0.2, 0.0], (1, 1), 0.1, q, 0, 1).unwrap();
        assert_eq!(sr.entries(), &[(1, -25)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let avg: Vec<f64> = (0..10_002).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sr = sparsify_quantize(&avg, (3334, 1), 0.5, q, 0, 1).unwrap();
        assert!((sr.sparsity() - 0.5).abs() < 0.03, "{}", sr.sparsity());
        for &(_, v) in sr.entries() {
            assert!((v as f32 * q).abs() >= 0.5);
        }
    }

    #[test]
    fn apply_empty_is_identity_and_quant_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let recon = random_gop(&mut rng, 8, 8);
        let empty = SparseResidual::empty(0, (8, 8), 0.02, DEFAULT_QUANT_STEP, 9);
        assert_eq!(apply_residual(&recon, &empty).unwrap(), recon);

        // single-frame window, theta 0: error is at most half a step
        let x = Frame::from_fn(8, 8, 0, |_, _, _| rng.gen_range(0.2..0.8)).unwrap();
        let xh = Frame::from_fn(8, 8, 0, |_, _, _| rng.gen_range(0.2..0.8)).unwrap();
        let avg: Vec<f64> = x.samples().iter().zip(xh.samples()).map(|(a, b)| *a as f64 - *b as f64).collect();
        let sr = sparsify_quantize(&avg, (8, 8), 0.0, DEFAULT_QUANT_STEP, 0, 1).unwrap();
        let rg = Gop::new(0, vec![xh; 9], 1).unwrap();
        let out = apply_residual(&rg, &sr).unwrap();
        for (a, b) in out.frame(0).samples().iter().zip(x.samples()) {
            assert!((a - b).abs() <= DEFAULT_QUANT_STEP / 2.0 + 1e-6);
        }
    }

    #[test]
    fn static_scene_gains_psnr() {
        let f = Frame::from_fn(32, 32, 0, |x, y, c| ((x * 7 + y * 3 + c * 5) % 11) as f32 / 10.0).unwrap();
        let g = Gop::new(0, vec![f.clone(); 9], 1).unwrap();
        let recon_f = Frame::filled(32, 32, 0, 0.5).unwrap();
        let recon = Gop::new(0, vec![recon_f.clone(); 9], 1).unwrap();
        let sr = gop_residual(&g, &recon, DEFAULT_THETA, DEFAULT_QUANT_STEP).unwrap();
        let out = apply_residual(&recon, &sr).unwrap();
        assert!(psnr(&f, out.frame(4)).unwrap() > psnr(&f, &recon_f).unwrap());
    }

    #[test]
    fn payload_round_trip_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let avg: Vec<f64> = (0..300).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let sr = sparsify_quantize(&avg, (10, 10), 0.1, DEFAULT_QUANT_STEP, 4, 9).unwrap();
        let bytes = sr.encode_payload();
        let back = SparseResidual::decode_payload(&bytes, 4, (10, 10), 0.1, DEFAULT_QUANT_STEP, 9).unwrap();
        assert_eq!(back, sr);
        // a scan longer than the frame is rejected
        assert!(SparseResidual::decode_payload(&bytes, 4, (5, 5), 0.1, DEFAULT_QUANT_STEP, 9).is_err());
        let empty = SparseResidual::empty(0, (4, 4), 0.02, DEFAULT_QUANT_STEP, 9);
        assert!(empty.encode_payload().len() <= 8);
    }

    #[test]
    fn out_of_range_index_is_corrupt() {
        let recon = Gop::new(0, vec![Frame::filled(2, 2, 0, 0.5).unwrap(); 9], 1).unwrap();
        let mut sr = SparseResidual::empty(0, (2, 2), 0.0, DEFAULT_QUANT_STEP, 9);
        sr.entries.push((12, 5));
        assert!(matches!(apply_residual(&recon, &sr), Err(Error::CorruptPacket(_))));
    }

    #[test]
    fn apply_stays_in_unit_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let recon = random_gop(&mut rng, 6, 6);
        let entries: Vec<(u32, i8)> = (0..108).map(|i| (i, if i % 2 == 0 { 127 } else { -127 })).collect();
        let sr = SparseResidual::from_entries(0, (6, 6), 0.0, 0.5, 9, entries).unwrap();
        let out = apply_residual(&recon, &sr).unwrap();
        assert!(out.frames().iter().flat_map(|f| f.samples()).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn raw_rate_examples() {
        assert!((raw_residual_rate(1920, 1080, 30.0, 3, 8) - 1.49299e9).abs() < 1e4);
        assert_eq!(raw_residual_rate(1, 1, 1.0, 1, 1), 1.0);
        assert!((raw_residual_rate(960, 540, 30.0, 3, 8) - 373.248e6).abs() < 1.0);
    }
}
