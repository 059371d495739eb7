//! Trace-driven bottleneck emulation with seeded Bernoulli loss,
//! propagation delay and a drop-tail byte queue.

mod link;
mod trace;

pub use link::{EmulatedLink, LinkConfig, LinkOutcome, LinkStats, DEFAULT_QUEUE_BYTES, MAX_PACKET_BYTES};
pub use trace::{LinkTrace, MTU};
