//! Similarity-ranked against random P-token dropping over a range of drop
//! rates on the moving square.

use semstream::codec::{CodecConfig, DctTokenizer};
use semstream::harness::drop_ablation;
use semstream::synth::{Content, SyntheticVideo, VideoSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    println!("drop_rate,mean_mse_similarity,mean_mse_random,similarity_wins");
    for rate in [0.0, 0.1, 0.25, 0.5, 0.75] {
        let (mut sim, mut rand, mut wins) = (0.0, 0.0, 0);
        for seed in 0..seeds {
            let v = SyntheticVideo::new(Content::MovingSquare, 360, 240, 30.0, 9, seed)?;
            let d = drop_ablation(&v.gop(0)?, &CodecConfig::default(), rate, seed, &DctTokenizer)?;
            sim += d.mse_similarity;
            rand += d.mse_random;
            wins += usize::from(d.mse_similarity < d.mse_random);
        }
        let n = seeds as f64;
        println!("{rate},{:.6},{:.6},{wins}/{seeds}", sim / n, rand / n);
    }
    Ok(())
}
