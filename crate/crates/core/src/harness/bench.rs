use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codec::{downscale_gop, upscale_gop, BilinearUpscaler, CodecConfig, DctTokenizer, Tokenizer};
use crate::entropy::{decode_dense, encode_dense};
use crate::error::{Error, Result};
use crate::residual::{gop_residual, DEFAULT_QUANT_STEP, DEFAULT_THETA};
use crate::session::{run_session, SessionConfig};
use crate::synth::VideoSource;

/// Wall-clock timings; the only nondeterministic output of the tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub gops: usize,
    pub width: usize,
    pub height: usize,
    pub encode_ms_per_gop: f64,
    pub decode_ms_per_gop: f64,
    pub residual_ms_per_gop: f64,
    pub upscale_ms_per_gop: f64,
    /// Residual scan bytes through the entropy coder and back.
    pub entropy_mb_per_s: f64,
    /// Emulated session wall time, when a session config was given.
    pub session_ms: Option<f64>,
    /// Realtime factor of the emulated session.
    pub session_speedup: Option<f64>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Times each pipeline stage over every GoP of `src`, then optionally one
/// full emulated session.
pub fn cmd_bench(src: &dyn VideoSource, codec: &CodecConfig, session: Option<&SessionConfig>) -> Result<BenchReport> {
    codec.validate()?;
    if src.is_empty() {
        return Err(Error::InvalidParameter("input holds no frames".into()));
    }
    let tok = DctTokenizer;
    let (mut enc, mut dec, mut res, mut up) = (0.0, 0.0, 0.0, 0.0);
    let (mut ent_bytes, mut ent_s) = (0usize, 0.0);
    let gops = src.gop_count();
    for k in 0..gops {
        let gop = src.gop(k)?;
        let t = Instant::now();
        let work = downscale_gop(&gop, codec.scale)?;
        let (i, p) = tok.encode(&work, codec)?;
        enc += ms(t);
        let t = Instant::now();
        let recon = tok.decode(&i, &p, codec, work.dims())?;
        dec += ms(t);
        let t = Instant::now();
        let sr = gop_residual(&work, &recon, DEFAULT_THETA, DEFAULT_QUANT_STEP)?;
        res += ms(t);
        let scan = sr.to_scan();
        let t = Instant::now();
        let back = decode_dense(&encode_dense(&scan)?)?;
        ent_s += t.elapsed().as_secs_f64();
        ent_bytes += scan.len();
        debug_assert_eq!(back, scan);
        let t = Instant::now();
        upscale_gop(&recon, codec.scale, src.dims(), &BilinearUpscaler)?;
        up += ms(t);
    }
    let n = gops as f64;
    let (session_ms, session_speedup) = match session {
        Some(cfg) => {
            let t = Instant::now();
            run_session(src, cfg)?;
            let wall = ms(t);
            let media = src.len() as f64 / src.fps() * 1000.0;
            (Some(wall), Some(media / wall.max(1e-9)))
        }
        None => (None, None),
    };
    Ok(BenchReport {
        gops,
        width: src.dims().0,
        height: src.dims().1,
        encode_ms_per_gop: enc / n,
        decode_ms_per_gop: dec / n,
        residual_ms_per_gop: res / n,
        upscale_ms_per_gop: up / n,
        entropy_mb_per_s: ent_bytes as f64 / 1e6 / ent_s.max(1e-9),
        session_ms,
        session_speedup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Content, SyntheticVideo};

    #[test]
    fn reports_every_stage() {
        let v = SyntheticVideo::new(Content::MovingSquare, 64, 48, 30.0, 18, 1).unwrap();
        let r = cmd_bench(&v, &CodecConfig::default(), None).unwrap();
        assert_eq!((r.gops, r.width, r.height), (2, 64, 48));
        assert!(r.encode_ms_per_gop >= 0.0 && r.entropy_mb_per_s > 0.0);
        assert!(r.session_ms.is_none());
    }
}
