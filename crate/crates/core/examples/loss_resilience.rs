//! 480p moving-square session at 25% random loss: rendered frame rate and
//! how many GoPs decode on time.

use semstream::netem::LinkTrace;
use semstream::session::{run_session, SessionConfig, ON_TIME_MS};
use semstream::synth::{Content, SyntheticVideo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let secs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let video = SyntheticVideo::new(Content::MovingSquare, 720, 480, 30.0, secs * 30, 3)?;
    let cfg = SessionConfig::new(LinkTrace::constant(8.0e6, 1000)?, 0.25, 2024);
    let out = run_session(&video, &cfg)?;
    let s = &out.summary;
    println!("gops            {}", s.gops);
    println!("rendered fps    {:.2} / {}", s.rendered_fps, s.target_fps);
    println!("on time (<= {ON_TIME_MS} ms) {:.1}%", s.on_time_fraction * 100.0);
    println!("mean psnr       {:.2} dB", s.mean_psnr_db.unwrap_or(f64::NAN));
    println!("nacks / retx    {} / {}", s.nacks, s.retransmissions);
    println!("rows lost       {}", s.rows_lost);
    let mut delays: Vec<u64> = out.metrics.iter().filter_map(|m| m.frame_delay_ms).collect();
    delays.sort_unstable();
    if !delays.is_empty() {
        println!("delay p50/p90   {} / {} ms", delays[delays.len() / 2], delays[delays.len() * 9 / 10]);
    }
    Ok(())
}
