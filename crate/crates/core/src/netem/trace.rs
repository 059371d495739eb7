use std::path::Path;

use crate::error::{Error, Result};

/// Bytes delivered per trace opportunity.
pub const MTU: usize = 1500;

/// Millisecond delivery opportunities, replayed cyclically with a period
/// equal to the last timestamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkTrace {
    stamps: Vec<u64>,
}

impl LinkTrace {
    pub fn new(stamps: Vec<u64>) -> Result<Self> {
        if stamps.is_empty() {
            return Err(Error::Trace { line: 0, detail: "trace holds no opportunities".into() });
        }
        if let Some(i) = stamps.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Trace { line: i + 2, detail: "timestamps must not decrease".into() });
        }
        if *stamps.last().unwrap() == 0 {
            return Err(Error::Trace { line: stamps.len(), detail: "trace period is zero".into() });
        }
        Ok(Self { stamps })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut stamps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v = t.parse::<u64>().map_err(|e| Error::Trace {
                line: i + 1,
                detail: format!("{t:?}: {e}"),
            })?;
            stamps.push(v);
        }
        Self::new(stamps)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Trace { line, detail } => Error::Trace {
                line,
                detail: format!("{detail} in {}", path.display()),
            },
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.stamps.len() * 6);
        for t in &self.stamps {
            s.push_str(&t.to_string());
            s.push('\n');
        }
        s
    }

    /// Evenly spaced opportunities approximating `bps` over one period.
    pub fn constant(bps: f64, period_ms: u64) -> Result<Self> {
        Self::square_wave(&[(bps, period_ms)])
    }

    /// Piecewise-constant capacity: each `(bps, duration_ms)` segment in turn.
    pub fn square_wave(segments: &[(f64, u64)]) -> Result<Self> {
        let mut stamps = Vec::new();
        let mut start = 0u64;
        for &(bps, dur) in segments {
            if !(bps > 0.0) || dur == 0 {
                return Err(Error::InvalidParameter(format!("segment {bps} bps for {dur} ms")));
            }
            let per_ms = bps / (MTU as f64 * 8.0 * 1000.0);
            let count = (per_ms * dur as f64).round() as u64;
            for k in 1..=count {
                stamps.push(start + ((k as f64 / per_ms).ceil() as u64).min(dur));
            }
            start += dur;
        }
        if stamps.last() != Some(&start) {
            // pad so the period covers the last segment exactly
            stamps.push(start);
        }
        Self::new(stamps)
    }

    pub fn period_ms(&self) -> u64 {
        *self.stamps.last().unwrap()
    }

    pub fn stamps(&self) -> &[u64] {
        &self.stamps
    }

    /// Time of the `k`-th opportunity counting across repetitions.
    pub fn opportunity(&self, k: u64) -> u64 {
        let n = self.stamps.len() as u64;
        (k / n) * self.period_ms() + self.stamps[(k % n) as usize]
    }

    /// Index of the first opportunity at or after `t`.
    pub fn first_at_or_after(&self, t: u64) -> u64 {
        let n = self.stamps.len() as u64;
        let period = self.period_ms();
        let cycle = t / period;
        let within = t - cycle * period;
        let i = self.stamps.partition_point(|s| *s < within) as u64;
        let k = cycle * n + i;
        debug_assert!(self.opportunity(k) >= t);
        k
    }

    /// Opportunities falling in `[from, to)`.
    pub fn opportunities_between(&self, from: u64, to: u64) -> u64 {
        if to <= from {
            return 0;
        }
        self.first_at_or_after(to) - self.first_at_or_after(from)
    }

    /// Capacity of `[from, to)` in bits per second.
    pub fn capacity_bps(&self, from: u64, to: u64) -> f64 {
        if to <= from {
            return 0.0;
        }
        self.opportunities_between(from, to) as f64 * (MTU * 8) as f64 * 1000.0 / (to - from) as f64
    }

    /// Mean capacity over one period.
    pub fn mean_bps(&self) -> f64 {
        self.stamps.len() as f64 * (MTU * 8) as f64 * 1000.0 / self.period_ms() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_twelve_ms_is_one_megabit() {
        let text: String = (1..=100).map(|k| format!("{}\n", 12 * k)).collect();
        let t = LinkTrace::parse(&text).unwrap();
        assert!((t.mean_bps() - 1.0e6).abs() < 1e-6);
        assert!((t.capacity_bps(0, 12_000) - 1.0e6).abs() < 1e-6);
    }

    #[test]
    fn single_line_repeats() {
        let t = LinkTrace::parse("1000\n").unwrap();
        assert!((t.mean_bps() - 12_000.0).abs() < 1e-9);
        assert_eq!(t.opportunity(0), 1000);
        assert_eq!(t.opportunity(4), 5000);
        assert!((t.capacity_bps(0, 10_000) - 12_000.0).abs() < 1e-9);
    }

    #[test]
    fn parse_errors_name_the_line() {
        match LinkTrace::parse("5\n10\nabc\n") {
            Err(Error::Trace { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(LinkTrace::parse("").is_err());
        assert!(LinkTrace::parse("0\n0\n").is_err());
        assert!(LinkTrace::parse("5\n3\n").is_err());
    }

    #[test]
    fn first_at_or_after_wraps() {
        let t = LinkTrace::new(vec![0, 3, 3, 10]).unwrap();
        assert_eq!(t.first_at_or_after(0), 0);
        assert_eq!(t.first_at_or_after(3), 1);
        assert_eq!(t.first_at_or_after(4), 3);
        assert_eq!(t.opportunity(3), 10);
        assert_eq!(t.opportunity(4), 10);
        assert_eq!(t.first_at_or_after(11), 5);
        assert_eq!(t.opportunity(5), 13);
    }

    #[test]
    fn generated_traces_hit_their_rates() {
        let t = LinkTrace::constant(500_000.0, 30_000).unwrap();
        assert!((t.mean_bps() / 500_000.0 - 1.0).abs() < 0.01);
        let sq = LinkTrace::square_wave(&[(200_000.0, 15_000), (500_000.0, 15_000)]).unwrap();
        assert_eq!(sq.period_ms(), 30_000);
        assert!((sq.capacity_bps(0, 15_000) / 200_000.0 - 1.0).abs() < 0.01);
        assert!((sq.capacity_bps(15_000, 30_000) / 500_000.0 - 1.0).abs() < 0.01);
        let fast = LinkTrace::constant(24.0e6, 1000).unwrap();
        assert!((fast.mean_bps() / 24.0e6 - 1.0).abs() < 0.01);
    }
}
