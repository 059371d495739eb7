//! Tokenizes one GoP at both operating scales and reports token volume and
//! reconstruction quality at display resolution.

use semstream::codec::{downscale_gop, upscale_gop, BilinearUpscaler, CodecConfig, DctTokenizer, Tokenizer};
use semstream::synth::{Content, SyntheticVideo, VideoSource};
use semstream::video::{psnr_from_mse, sequence_mse};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let content: Content = std::env::args().nth(1).as_deref().unwrap_or("square").parse()?;
    let video = SyntheticVideo::new(content, 720, 480, 30.0, 9, 1)?;
    let gop = video.gop(0)?;
    println!("scale,tokens,values_per_gop,psnr_db");
    for scale in [2u8, 3] {
        let cfg = CodecConfig::default().with_scale(scale);
        let work = downscale_gop(&gop, scale)?;
        let (i, p) = DctTokenizer.encode(&work, &cfg)?;
        let recon = DctTokenizer.decode(&i, &p, &cfg, work.dims())?;
        let shown = upscale_gop(&recon, scale, video.dims(), &BilinearUpscaler)?;
        let psnr = psnr_from_mse(sequence_mse(gop.frames(), shown.frames())?);
        println!("{scale},{},{},{psnr:.2}", i.rows() * i.cols(), i.values().len() + p.values().len());
    }
    Ok(())
}
