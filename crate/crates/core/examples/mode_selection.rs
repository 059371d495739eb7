//! Feeds a bandwidth ramp with jitter through the controller and prints
//! every mode change and the parameters it picks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semstream::codec::CodecConfig;
use semstream::rate::{compute_anchors, HysteresisConfig, RateController};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let anchors = compute_anchors((720, 480), 30.0, &CodecConfig::default(), 0)?;
    println!("anchors: 3x {:.0} bps, 2x {:.0} bps", anchors.r_3x, anchors.r_2x);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut c = RateController::new(anchors, HysteresisConfig::default(), 0.5 * anchors.r_3x);
    let top = 1.5 * anchors.r_2x;
    for k in 0..400 {
        // up for 200 reports, then back down
        let x = if k < 200 { k as f64 / 200.0 } else { (400 - k) as f64 / 200.0 };
        let b = (0.5 * anchors.r_3x + x * (top - 0.5 * anchors.r_3x)) * (1.0 + rng.gen_range(-0.05..0.05));
        if let Some(from) = c.on_report(b) {
            let d = c.decision();
            println!(
                "report {k:3} at {b:9.0} bps: {} -> {} scale {} drop {:.3} residual {:.0} bps",
                from.label(),
                d.mode.label(),
                d.scale,
                d.drop_rate,
                d.residual_budget_bps
            );
        }
    }
    println!("{} switches", c.switches());
    Ok(())
}
