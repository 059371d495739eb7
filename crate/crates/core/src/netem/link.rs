use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::{LinkTrace, MTU};
use crate::error::{Error, Result};

pub const DEFAULT_QUEUE_BYTES: usize = 60_000;
pub const MAX_PACKET_BYTES: usize = 64 * 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig {
    pub loss_rate: f64,
    pub seed: u64,
    pub prop_delay_ms: u64,
    pub queue_bytes: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            loss_rate: 0.0,
            seed: 0,
            prop_delay_ms: 20,
            queue_bytes: DEFAULT_QUEUE_BYTES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkOutcome {
    Delivered { at_ms: u64 },
    LossDrop,
    QueueDrop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub delivered: u64,
    pub loss_dropped: u64,
    pub queue_dropped: u64,
    pub delivered_bytes: u64,
}

/// One direction of a trace-driven bottleneck.
///
/// Opportunities grant [`MTU`] bytes of credit to the head of a FIFO queue;
/// a packet may span several opportunities and several small packets may
/// share one. Credit of an opportunity that finds the queue empty is lost.
/// After a delivery, [`EmulatedLink::fragments`] lists when each slice of
/// the packet reached the far end.
#[derive(Debug)]
pub struct EmulatedLink {
    trace: LinkTrace,
    cfg: LinkConfig,
    rng: ChaCha8Rng,
    /// Opportunity currently being drained and its unused credit.
    cur_time: u64,
    cur_credit: usize,
    next_k: u64,
    in_queue: VecDeque<(u64, usize)>,
    queued_bytes: usize,
    fragments: Vec<(u64, usize)>,
    stats: LinkStats,
}

impl EmulatedLink {
    pub fn new(trace: LinkTrace, cfg: LinkConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.loss_rate) {
            return Err(Error::InvalidParameter(format!("loss rate {} outside [0, 1]", cfg.loss_rate)));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            trace,
            cfg,
            cur_time: 0,
            cur_credit: 0,
            next_k: 0,
            in_queue: VecDeque::new(),
            queued_bytes: 0,
            fragments: Vec::new(),
            stats: LinkStats::default(),
        })
    }

    pub fn trace(&self) -> &LinkTrace {
        &self.trace
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// `(arrival_ms, bytes)` per opportunity used by the last delivered packet.
    pub fn fragments(&self) -> &[(u64, usize)] {
        &self.fragments
    }

    /// Bytes enqueued and not yet fully serialized at `now`.
    pub fn queued_bytes(&mut self, now: u64) -> usize {
        self.expire(now);
        self.queued_bytes
    }

    fn expire(&mut self, now: u64) {
        while let Some(&(dep, bytes)) = self.in_queue.front() {
            if dep > now {
                break;
            }
            self.queued_bytes -= bytes;
            self.in_queue.pop_front();
        }
    }

    /// Offers one packet at time `now`; calls must be in non-decreasing time order.
    pub fn transmit(&mut self, bytes: usize, now: u64) -> Result<LinkOutcome> {
        self.transmit_paced(bytes, now, 0.0)
    }

    /// Like [`EmulatedLink::transmit`], but the packet's [`MTU`] units reach
    /// the queue `unit_gap_ms` apart, as a pacing sender hands them over.
    /// The next call must not precede the last unit.
    pub fn transmit_paced(&mut self, bytes: usize, now: u64, unit_gap_ms: f64) -> Result<LinkOutcome> {
        if bytes == 0 || bytes > MAX_PACKET_BYTES {
            return Err(Error::InvalidParameter(format!("packet of {bytes} bytes")));
        }
        if !(unit_gap_ms >= 0.0 && unit_gap_ms.is_finite()) {
            return Err(Error::InvalidParameter(format!("unit gap {unit_gap_ms} ms")));
        }
        // one draw per packet keeps the loss sequence independent of queue state
        let lost = self.rng.gen::<f64>() < self.cfg.loss_rate;
        if lost {
            self.stats.loss_dropped += 1;
            return Ok(LinkOutcome::LossDrop);
        }
        self.expire(now);
        if self.queued_bytes + bytes > self.cfg.queue_bytes {
            self.stats.queue_dropped += 1;
            return Ok(LinkOutcome::QueueDrop);
        }
        self.fragments.clear();
        let mut sent = 0;
        let mut unit = 0u64;
        while sent < bytes {
            let entry = now + (unit as f64 * unit_gap_ms).floor() as u64;
            let mut remaining = (bytes - sent).min(MTU);
            sent += remaining;
            unit += 1;
            while remaining > 0 {
                if self.cur_credit == 0 || self.cur_time < entry {
                    let k = self.trace.first_at_or_after(entry).max(self.next_k);
                    self.cur_time = self.trace.opportunity(k);
                    self.cur_credit = MTU;
                    self.next_k = k + 1;
                }
                let take = remaining.min(self.cur_credit);
                remaining -= take;
                self.cur_credit -= take;
                let at = self.cur_time + self.cfg.prop_delay_ms;
                match self.fragments.last_mut() {
                    Some(f) if f.0 == at => f.1 += take,
                    _ => self.fragments.push((at, take)),
                }
            }
        }
        let departure = self.cur_time;
        self.in_queue.push_back((departure, bytes));
        self.queued_bytes += bytes;
        self.stats.delivered += 1;
        self.stats.delivered_bytes += bytes as u64;
        Ok(LinkOutcome::Delivered {
            at_ms: departure + self.cfg.prop_delay_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(trace: &str, cfg: LinkConfig) -> EmulatedLink {
        EmulatedLink::new(LinkTrace::parse(trace).unwrap(), cfg).unwrap()
    }

    #[test]
    fn schedule_arithmetic() {
        let mut l = link("12\n24\n", LinkConfig { prop_delay_ms: 20, ..Default::default() });
        assert_eq!(l.transmit(1000, 0).unwrap(), LinkOutcome::Delivered { at_ms: 32 });
        // shares the rest of the first opportunity
        assert_eq!(l.transmit(500, 0).unwrap(), LinkOutcome::Delivered { at_ms: 32 });
        // spans into the next
        assert_eq!(l.transmit(100, 1).unwrap(), LinkOutcome::Delivered { at_ms: 44 });
        // idle credit is not banked
        assert_eq!(l.transmit(100, 30).unwrap(), LinkOutcome::Delivered { at_ms: 36 + 20 });
        assert_eq!(l.transmit(3000, 30).unwrap(), LinkOutcome::Delivered { at_ms: 60 + 20 });
        assert_eq!(l.fragments(), &[(56, 1400), (68, 1500), (80, 100)]);
    }

    #[test]
    fn paced_units_enter_apart() {
        // an opportunity every ms; units handed over 10 ms apart
        let mut l = link("1\n", LinkConfig { prop_delay_ms: 5, ..Default::default() });
        assert_eq!(l.transmit_paced(3200, 0, 10.0).unwrap(), LinkOutcome::Delivered { at_ms: 26 });
        assert_eq!(l.fragments(), &[(6, 1500), (16, 1500), (26, 200)]);
        // unpaced, the same packet rides consecutive opportunities
        assert_eq!(l.transmit_paced(3200, 30, 0.0).unwrap(), LinkOutcome::Delivered { at_ms: 38 });
        assert!(l.transmit_paced(10, 40, -1.0).is_err());
    }

    #[test]
    fn total_loss() {
        let mut l = link("1\n", LinkConfig { loss_rate: 1.0, ..Default::default() });
        for t in 0..100 {
            assert_eq!(l.transmit(100, t).unwrap(), LinkOutcome::LossDrop);
        }
    }

    #[test]
    fn bernoulli_rate() {
        let mut l = link("1\n", LinkConfig { loss_rate: 0.25, seed: 42, queue_bytes: usize::MAX, ..Default::default() });
        let mut lost = 0;
        for i in 0..100_000u64 {
            if l.transmit(100, i).unwrap() == LinkOutcome::LossDrop {
                lost += 1;
            }
        }
        assert!((lost as f64 / 1e5 - 0.25).abs() < 0.01);
    }

    #[test]
    fn drop_tail_when_full() {
        let mut l = link("1000\n", LinkConfig { queue_bytes: 4000, ..Default::default() });
        let outcomes: Vec<_> = (0..4).map(|_| l.transmit(1500, 0).unwrap()).collect();
        assert!(matches!(outcomes[1], LinkOutcome::Delivered { .. }));
        assert_eq!(outcomes[2], LinkOutcome::QueueDrop);
        assert_eq!(l.stats().queue_dropped, 2);
        // first packet leaves at 1000 ms freeing room
        assert!(matches!(l.transmit(1500, 1000).unwrap(), LinkOutcome::Delivered { .. }));
    }

    #[test]
    fn saturating_flow_matches_capacity() {
        let trace = LinkTrace::constant(1.0e6, 1000).unwrap();
        let mut l = EmulatedLink::new(trace.clone(), LinkConfig { queue_bytes: 30_000, ..Default::default() }).unwrap();
        let mut bytes = 0u64;
        for t in 0..20_000u64 {
            for _ in 0..2 {
                if let LinkOutcome::Delivered { at_ms } = l.transmit(1200, t).unwrap() {
                    if at_ms <= 20_000 {
                        bytes += 1200;
                    }
                }
            }
        }
        let rate = bytes as f64 * 8.0 / 20.0;
        assert!((rate / trace.mean_bps() - 1.0).abs() < 0.02, "{rate}");
        let s = l.stats();
        assert_eq!(s.delivered + s.loss_dropped + s.queue_dropped, 40_000);
    }

    #[test]
    fn same_seed_same_schedule() {
        let run = || {
            let mut l = link("3\n7\n", LinkConfig { loss_rate: 0.3, seed: 9, ..Default::default() });
            (0..500u64).map(|t| l.transmit(700, t * 2).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
