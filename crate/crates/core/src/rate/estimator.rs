use std::collections::VecDeque;

use crate::transport::BwReport;

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_REPORT_INTERVAL_MS: u64 = 100;

/// Windowed-max delivery-rate estimator run at the receiver.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    samples: VecDeque<(u64, f64)>,
    window: usize,
    report_interval_ms: u64,
    last_report: Option<u64>,
}

impl Default for EstimatorState {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW, DEFAULT_REPORT_INTERVAL_MS)
    }
}

impl EstimatorState {
    pub fn new(window: usize, report_interval_ms: u64) -> Self {
        Self {
            samples: VecDeque::with_capacity(window),
            window: window.max(1),
            report_interval_ms,
            last_report: None,
        }
    }

    /// Max over the retained samples; 0 before the first sample.
    pub fn estimate(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    pub fn samples(&self) -> impl Iterator<Item = &(u64, f64)> {
        self.samples.iter()
    }

    /// Records `delivered_bytes` over `interval_ms` ending at `now`.
    pub fn update(&mut self, now_ms: u64, delivered_bytes: u64, interval_ms: u64) -> Option<BwReport> {
        assert!(interval_ms > 0, "estimator interval must be positive");
        let rate = delivered_bytes as f64 * 8.0 * 1000.0 / interval_ms as f64;
        self.push_sample(now_ms, rate)
    }

    /// Records an externally measured rate sample.
    pub fn push_sample(&mut self, now_ms: u64, rate_bps: f64) -> Option<BwReport> {
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back((now_ms, rate_bps.max(0.0)));
        let due = self
            .last_report
            .is_none_or(|t| now_ms.saturating_sub(t) >= self.report_interval_ms);
        if !due {
            return None;
        }
        self.last_report = Some(now_ms);
        Some(BwReport {
            timestamp_ms: now_ms,
            bandwidth_bps: self.estimate().round().min(u32::MAX as f64) as u32,
        })
    }
}

/// Arrivals inside one reporting interval.
///
/// The sample is the dispersion rate of the packet train (bytes landing
/// after the first arrival instant over the spread of arrival times) when
/// the train spans time, else the plain interval rate. Counting whole
/// slots per interval would overstate a slotted link by up to one slot.
#[derive(Clone, Debug, Default)]
pub struct DeliverySampler {
    first: Option<u64>,
    last: u64,
    bytes_total: u64,
    bytes_after_first: u64,
}

impl DeliverySampler {
    pub fn on_arrival(&mut self, now_ms: u64, bytes: usize) {
        match self.first {
            None => self.first = Some(now_ms),
            Some(f) if now_ms > f => self.bytes_after_first += bytes as u64,
            Some(_) => {}
        }
        self.last = now_ms;
        self.bytes_total += bytes as u64;
    }

    pub fn bytes(&self) -> u64 {
        self.bytes_total
    }

    /// Rate for the interval just ended, resetting the sampler.
    pub fn take(&mut self, interval_ms: u64) -> f64 {
        let plain = self.bytes_total as f64 * 8000.0 / interval_ms.max(1) as f64;
        let rate = match self.first {
            Some(f) if self.last > f => self.bytes_after_first as f64 * 8000.0 / (self.last - f) as f64,
            _ => plain,
        };
        *self = Self::default();
        rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_delivery_converges() {
        let mut e = EstimatorState::default();
        for k in 1..=10u64 {
            // 500 kbps over 100 ms = 6250 bytes
            e.update(k * 100, 6250, 100);
        }
        assert!((e.estimate() / 500_000.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn burst_held_for_window_then_decays() {
        let mut e = EstimatorState::default();
        e.update(100, 25_000, 100);
        assert_eq!(e.estimate(), 2_000_000.0);
        for k in 2..=10u64 {
            e.update(k * 100, 6250, 100);
            assert_eq!(e.estimate(), 2_000_000.0);
        }
        e.update(1100, 6250, 100);
        assert_eq!(e.estimate(), 500_000.0);
    }

    #[test]
    fn zero_interval_sample_is_recorded() {
        let mut e = EstimatorState::new(3, 100);
        e.update(100, 6250, 100);
        e.update(200, 0, 100);
        assert_eq!(e.estimate(), 500_000.0);
        e.update(300, 0, 100);
        e.update(400, 0, 100);
        assert_eq!(e.estimate(), 0.0);
    }

    #[test]
    fn reports_every_interval() {
        let mut e = EstimatorState::default();
        let reports: Vec<_> = (0..20u64).filter_map(|k| e.update(k * 50 + 50, 1000, 50)).collect();
        assert_eq!(reports.len(), 10);
        assert_eq!(reports[1].timestamp_ms, 150);
        assert_eq!(reports[0].bandwidth_bps, 160_000);
    }

    #[test]
    fn sandwich_between_mean_and_peak() {
        let mut e = EstimatorState::default();
        let rates = [3000u64, 9000, 1000, 6000, 7000, 2000, 8000, 4000, 5000, 100];
        for (k, b) in rates.iter().enumerate() {
            e.update(k as u64 * 100, *b, 100);
        }
        let mean = rates.iter().sum::<u64>() as f64 * 80.0 / rates.len() as f64;
        let peak = 9000.0 * 80.0;
        assert!(e.estimate() >= mean && e.estimate() <= peak);
    }

    #[test]
    fn train_dispersion() {
        let mut s = DeliverySampler::default();
        for k in 0..5u64 {
            s.on_arrival(10 + k * 12, 1500);
        }
        assert!((s.take(100) - 1.0e6).abs() < 1e-6);
        // two 1500 B slots 60 ms apart in one interval: the slot rate, not 240k
        s.on_arrival(5, 1500);
        s.on_arrival(65, 1500);
        assert!((s.take(100) - 200_000.0).abs() < 1e-6);
        // packets sharing the first instant do not count toward dispersion
        for t in [0, 0, 0, 10] {
            s.on_arrival(t, 1000);
        }
        assert!((s.take(100) - 800_000.0).abs() < 1e-6);
        s.on_arrival(3, 700);
        assert_eq!(s.take(100), 56_000.0);
        assert_eq!(s.take(100), 0.0);
    }
}
