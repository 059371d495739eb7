//! Sweeps the residual threshold on a static scene: coded residual size
//! against the quality it buys over the token-only reconstruction.

use semstream::codec::{downscale_gop, CodecConfig, DctTokenizer, Tokenizer};
use semstream::residual::{apply_residual, gop_residual, raw_residual_rate, DEFAULT_QUANT_STEP};
use semstream::synth::{Content, SyntheticVideo, VideoSource};
use semstream::video::{psnr_from_mse, sequence_mse, GOP_LEN};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let video = SyntheticVideo::new(Content::StaticScene, 720, 480, 30.0, 9, 8)?;
    let cfg = CodecConfig::default();
    let work = downscale_gop(&video.gop(0)?, cfg.scale)?;
    let (i, p) = DctTokenizer.encode(&work, &cfg)?;
    let recon = DctTokenizer.decode(&i, &p, &cfg, work.dims())?;
    let base = psnr_from_mse(sequence_mse(work.frames(), recon.frames())?);
    let (w, h) = work.dims();
    let raw = raw_residual_rate(w, h, video.fps(), 3, 8);
    println!("token-only psnr {base:.2} dB");
    println!("theta,kept,payload_bytes,ratio,psnr_db");
    for theta in [0.005, 0.01, 0.02, 0.04, 0.08] {
        let sr = gop_residual(&work, &recon, theta, DEFAULT_QUANT_STEP)?;
        let bytes = sr.encode_payload().len();
        let coded_bps = bytes as f64 * 8.0 * video.fps() / GOP_LEN as f64;
        let fixed = apply_residual(&recon, &sr)?;
        let psnr = psnr_from_mse(sequence_mse(work.frames(), fixed.frames())?);
        println!("{theta},{},{bytes},{:.0},{psnr:.2}", sr.entries().len(), raw / coded_bps);
    }
    Ok(())
}
