//! Streams noise content over a square-wave link and prints, per second,
//! what the sender emitted against its estimate and the link capacity.

use semstream::netem::LinkTrace;
use semstream::session::{rate_windows, run_session, SessionConfig};
use semstream::synth::{Content, SyntheticVideo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let secs: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);
    let trace = LinkTrace::square_wave(&[(200_000.0, 15_000), (500_000.0, 15_000)])?;
    let video = SyntheticVideo::new(Content::NoiseField, 360, 240, 30.0, (secs * 30) as usize, 1)?;
    let mut cfg = SessionConfig::new(trace.clone(), 0.0, 1);
    cfg.playout_delay_ms = 1000;
    let out = run_session(&video, &cfg)?;
    let windows = rate_windows(&out.log, 1000, secs * 1000)?;
    println!("start_s,sent_kbps,estimate_kbps,capacity_kbps");
    for w in &windows {
        println!(
            "{},{:.1},{:.1},{:.1}",
            w.start_ms / 1000,
            w.sent_bps / 1e3,
            w.estimate_bps / 1e3,
            trace.capacity_bps(w.start_ms, w.end_ms) / 1e3
        );
    }
    eprintln!("{:?}", out.summary);
    Ok(())
}
