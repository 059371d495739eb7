use crate::error::{Error, Result};

pub const MAX_RUN: usize = 255;
pub const MAX_MAGNITUDE: i8 = 127;

/// Number of distinct coded symbols: 255 run lengths, 254 values, EOS.
pub const ALPHABET: usize = 255 + 254 + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    /// `k` consecutive zeros, `1 <= k <= 255`.
    ZeroRun(u8),
    /// A non-zero quantized value in `[-127, 127]`.
    Value(i8),
    Eos,
}

impl Symbol {
    pub fn index(self) -> usize {
        match self {
            Symbol::ZeroRun(k) => k as usize - 1,
            Symbol::Value(v) if v < 0 => 255 + (v as i32 + 127) as usize,
            Symbol::Value(v) => 381 + v as usize,
            Symbol::Eos => ALPHABET - 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0..=254 => Some(Symbol::ZeroRun(i as u8 + 1)),
            255..=381 => Some(Symbol::Value((i as i32 - 255 - 127) as i8)),
            382..=508 => Some(Symbol::Value((i - 381) as i8)),
            509 => Some(Symbol::Eos),
            _ => None,
        }
    }

    fn is_valid(self) -> bool {
        match self {
            Symbol::ZeroRun(k) => k >= 1,
            Symbol::Value(v) => v != 0 && v != i8::MIN,
            Symbol::Eos => true,
        }
    }
}

/// Run-length symbol form of a dense quantized scan, terminated by one EOS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolStream {
    symbols: Vec<Symbol>,
}

impl SymbolStream {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        let Some((&last, body)) = symbols.split_last() else {
            return Err(Error::Entropy("symbol stream must end with EOS".into()));
        };
        if last != Symbol::Eos {
            return Err(Error::Entropy("symbol stream must end with EOS".into()));
        }
        if let Some(bad) = body.iter().find(|s| **s == Symbol::Eos || !s.is_valid()) {
            return Err(Error::Entropy(format!("invalid symbol {bad:?} inside stream")));
        }
        Ok(Self { symbols })
    }

    /// Run-length codes a dense scan; runs longer than 255 are chained.
    pub fn from_dense(scan: &[i8]) -> Result<Self> {
        let mut symbols = Vec::new();
        let mut run = 0usize;
        for &v in scan {
            if v == 0 {
                run += 1;
                if run == MAX_RUN {
                    symbols.push(Symbol::ZeroRun(MAX_RUN as u8));
                    run = 0;
                }
                continue;
            }
            if v == i8::MIN {
                return Err(Error::Entropy("value -128 is outside the coded range".into()));
            }
            if run > 0 {
                symbols.push(Symbol::ZeroRun(run as u8));
                run = 0;
            }
            symbols.push(Symbol::Value(v));
        }
        if run > 0 {
            symbols.push(Symbol::ZeroRun(run as u8));
        }
        symbols.push(Symbol::Eos);
        Ok(Self { symbols })
    }

    pub fn to_dense(&self) -> Vec<i8> {
        let mut out = Vec::new();
        for s in &self.symbols {
            match *s {
                Symbol::ZeroRun(k) => out.extend(std::iter::repeat_n(0i8, k as usize)),
                Symbol::Value(v) => out.push(v),
                Symbol::Eos => break,
            }
        }
        out
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_bijection() {
        for i in 0..ALPHABET {
            let s = Symbol::from_index(i).unwrap();
            assert!(s.is_valid());
            assert_eq!(s.index(), i);
        }
        assert_eq!(Symbol::from_index(ALPHABET), None);
    }

    #[test]
    fn long_runs_chain() {
        let mut scan = vec![0i8; 600];
        scan.push(5);
        let s = SymbolStream::from_dense(&scan).unwrap();
        assert_eq!(
            s.symbols(),
            &[
                Symbol::ZeroRun(255),
                Symbol::ZeroRun(255),
                Symbol::ZeroRun(90),
                Symbol::Value(5),
                Symbol::Eos
            ]
        );
        assert_eq!(s.to_dense(), scan);
    }

    #[test]
    fn validates_structure() {
        assert!(SymbolStream::new(vec![]).is_err());
        assert!(SymbolStream::new(vec![Symbol::Value(1)]).is_err());
        assert!(SymbolStream::new(vec![Symbol::Eos, Symbol::Eos]).is_err());
        assert!(SymbolStream::new(vec![Symbol::Value(0), Symbol::Eos]).is_err());
        assert!(SymbolStream::from_dense(&[-128]).is_err());
    }
}
