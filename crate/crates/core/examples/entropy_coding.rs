//! Residual scans through the run-length symbol map and adaptive range
//! coder, against the zeroth-order entropy of their symbols.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semstream::entropy::{decode_dense, encode_dense, SymbolStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("density,samples,symbols,coded_bytes,entropy_bytes");
    for density in [0.01, 0.05, 0.2, 0.5] {
        let scan: Vec<i8> = (0..200_000)
            .map(|_| if rng.gen_bool(density) { rng.gen_range(-6i8..=6) } else { 0 })
            .collect();
        let coded = encode_dense(&scan)?;
        assert_eq!(decode_dense(&coded)?, scan);
        let stream = SymbolStream::from_dense(&scan)?;
        let mut counts: HashMap<_, usize> = HashMap::new();
        for s in stream.symbols() {
            *counts.entry(*s).or_default() += 1;
        }
        let n = stream.symbols().len() as f64;
        let bits: f64 = counts.values().map(|&c| -(c as f64) * (c as f64 / n).log2()).sum();
        println!("{density},{},{},{},{:.0}", scan.len(), stream.symbols().len(), coded.len(), bits / 8.0);
    }
    Ok(())
}
