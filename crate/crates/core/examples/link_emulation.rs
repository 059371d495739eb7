//! Pushes a fixed packet schedule through a trace-driven link and prints
//! each packet's fate.

use semstream::netem::{EmulatedLink, LinkConfig, LinkOutcome, LinkTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = LinkTrace::constant(600_000.0, 1000)?;
    let cfg = LinkConfig { loss_rate: 0.1, seed: 7, queue_bytes: 12_000, ..Default::default() };
    let mut link = EmulatedLink::new(trace, cfg)?;
    println!("send_ms,bytes,outcome,arrive_ms");
    // a 4-packet burst every 50 ms overdrives the link
    for k in 0..40u64 {
        let now = (k / 4) * 50;
        let bytes = 1200 + 100 * (k % 4) as usize;
        match link.transmit(bytes, now)? {
            LinkOutcome::Delivered { at_ms } => println!("{now},{bytes},delivered,{at_ms}"),
            LinkOutcome::LossDrop => println!("{now},{bytes},lost,"),
            LinkOutcome::QueueDrop => println!("{now},{bytes},queue_full,"),
        }
    }
    eprintln!("{:?}", link.stats());
    Ok(())
}
