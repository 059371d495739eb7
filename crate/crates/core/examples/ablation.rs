//! Per-GoP drop-strategy and blend ablations over a clip, written as CSV.

use semstream::harness::{cmd_ablate, AblateConfig};
use semstream::synth::{Content, SyntheticVideo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "ablate.csv".into());
    let video = SyntheticVideo::new(Content::MovingSquare, 720, 480, 30.0, 90, 5)?;
    let (report, _) = cmd_ablate(&video, &AblateConfig::default(), out.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
