//! Lossless adaptive arithmetic coding of run-length residual scans.
//!
//! The scan is first turned into a [`SymbolStream`] of zero runs and
//! non-zero values, then coded with a range coder under an adaptive order-0
//! model. Encoder and decoder start from identical all-ones counts.

mod model;
mod range;
mod symbols;

pub use model::{AdaptiveModel, INCREMENT, MAX_TOTAL};
pub use range::{RangeDecoder, RangeEncoder};
pub use symbols::{Symbol, SymbolStream, ALPHABET, MAX_MAGNITUDE, MAX_RUN};

use crate::error::{Error, Result};

pub fn encode_stream(stream: &SymbolStream) -> Vec<u8> {
    let mut model = AdaptiveModel::new(ALPHABET);
    let mut enc = RangeEncoder::new();
    for s in stream.symbols() {
        let i = s.index();
        enc.encode(model.cumulative(i), model.freq(i), model.total());
        model.update(i);
    }
    enc.finish()
}

pub fn decode_stream(bytes: &[u8]) -> Result<SymbolStream> {
    let mut model = AdaptiveModel::new(ALPHABET);
    let mut dec = RangeDecoder::new(bytes)?;
    let mut symbols = Vec::new();
    loop {
        let target = dec.target(model.total())?;
        let (i, cum) = model.find(target);
        dec.consume(cum, model.freq(i))?;
        model.update(i);
        let s = Symbol::from_index(i).ok_or_else(|| Error::Entropy(format!("symbol index {i}")))?;
        symbols.push(s);
        if s == Symbol::Eos {
            break;
        }
    }
    if dec.consumed() != bytes.len() {
        return Err(Error::Entropy(format!(
            "{} trailing bytes after EOS",
            bytes.len() - dec.consumed()
        )));
    }
    SymbolStream::new(symbols)
}

/// Convenience: run-length code and entropy code a dense scan.
pub fn encode_dense(scan: &[i8]) -> Result<Vec<u8>> {
    Ok(encode_stream(&SymbolStream::from_dense(scan)?))
}

pub fn decode_dense(bytes: &[u8]) -> Result<Vec<i8>> {
    Ok(decode_stream(bytes)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eos_only_is_tiny() {
        let s = SymbolStream::new(vec![Symbol::Eos]).unwrap();
        let bytes = encode_stream(&s);
        assert!(bytes.len() <= 8, "{}", bytes.len());
        assert_eq!(decode_stream(&bytes).unwrap(), s);
    }

    #[test]
    fn all_zero_scan() {
        let scan = vec![0i8; 10_000];
        let bytes = encode_dense(&scan).unwrap();
        assert!(bytes.len() as f64 <= 0.02 * scan.len() as f64, "{}", bytes.len());
        assert_eq!(decode_dense(&bytes).unwrap(), scan);
    }

    #[test]
    fn alternating_extremes() {
        let scan: Vec<i8> = (0..5000).map(|i| if i % 2 == 0 { 127 } else { -127 }).collect();
        assert_eq!(decode_dense(&encode_dense(&scan).unwrap()).unwrap(), scan);
    }

    #[test]
    fn deterministic_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scan: Vec<i8> = (0..4000).map(|_| if rng.gen_bool(0.1) { rng.gen_range(-127..=127) } else { 0 }).collect();
        assert_eq!(encode_dense(&scan).unwrap(), encode_dense(&scan).unwrap());
    }

    #[test]
    fn truncation_and_corruption_are_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let scan: Vec<i8> = (0..3000).map(|_| rng.gen_range(-20..=20)).collect();
        let bytes = encode_dense(&scan).unwrap();
        for cut in [0, 1, 3, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_dense(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_dense(&extra).is_err());
    }

    /// Symbols drawn i.i.d. from a fixed distribution; returns the stream and its entropy in bits.
    pub(crate) fn iid_stream(n: usize, seed: u64) -> (SymbolStream, f64) {
        let alphabet: Vec<Symbol> = (1..=6u8)
            .map(Symbol::ZeroRun)
            .chain([1i8, -1, 2, -2, 3, -3, 7, -7, 40, -90].into_iter().map(Symbol::Value))
            .collect();
        let weights: Vec<f64> = (0..alphabet.len()).map(|k| 0.8f64.powi(k as i32)).collect();
        let total: f64 = weights.iter().sum();
        let entropy: f64 = weights.iter().map(|w| { let p = w / total; -p * p.log2() }).sum();
        let dist = rand::distributions::WeightedIndex::new(&weights).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut symbols: Vec<Symbol> = (0..n).map(|_| alphabet[rng.sample(&dist)]).collect();
        symbols.push(Symbol::Eos);
        (SymbolStream::new(symbols).unwrap(), entropy * n as f64)
    }

    #[test]
    fn iid_source_near_entropy() {
        for seed in 0..3 {
            let (stream, bits) = iid_stream(100_000, seed);
            let bytes = encode_stream(&stream);
            let ratio = bytes.len() as f64 * 8.0 / bits;
            assert!((1.0..=1.05).contains(&ratio), "ratio {ratio}");
            assert_eq!(decode_stream(&bytes).unwrap(), stream);
        }
    }

    fn random_scan(rng: &mut ChaCha8Rng) -> Vec<i8> {
        let len = rng.gen_range(0..800);
        let density: f64 = rng.gen();
        (0..len)
            .map(|_| if rng.gen_bool(density) { rng.gen_range(-127..=127) } else { 0 })
            .collect()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(2000))]
        #[test]
        fn round_trip(seed in proptest::prelude::any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scan = random_scan(&mut rng);
            let stream = SymbolStream::from_dense(&scan).unwrap();
            let bytes = encode_stream(&stream);
            proptest::prop_assert_eq!(decode_stream(&bytes).unwrap(), stream);
        }
    }
}
