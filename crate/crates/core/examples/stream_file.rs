//! Encodes a clip to a token stream file, decodes it back to y4m and
//! scores the result against the source.

use semstream::harness::{cmd_decode, cmd_encode, EncodeConfig};
use semstream::synth::{Content, SyntheticVideo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("semstream-example");
    std::fs::create_dir_all(&dir)?;
    let video = SyntheticVideo::new(Content::MovingSquare, 720, 480, 30.0, 90, 2)?;
    let stream = dir.join("clip.sms");
    let y4m = dir.join("clip.y4m");
    let enc = cmd_encode(&video, &EncodeConfig::default(), &stream)?;
    println!(
        "encoded {} frames to {} bytes ({} token, {} residual)",
        enc.frames, enc.file_bytes, enc.token_bytes, enc.residual_bytes
    );
    let dec = cmd_decode(&stream, Some(&y4m), Some(&video))?;
    println!("decoded {} frames to {}, psnr {:.2} dB", dec.frames, y4m.display(), dec.psnr_db.unwrap_or(f64::NAN));
    Ok(())
}
