use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::netem::{LinkConfig, LinkTrace};
use crate::rate::{HysteresisConfig, RateAnchors, ThetaLadder, DEFAULT_REPORT_INTERVAL_MS, DEFAULT_WINDOW};
use crate::residual::DEFAULT_QUANT_STEP;
use crate::transport::LossPolicyConfig;

pub const MAX_LOSS_RATE: f64 = 0.30;
/// A GoP is on time when it decodes within this long of being captured.
pub const ON_TIME_MS: u64 = 150;

#[derive(Clone, Debug)]
pub struct SessionConfig {
    /// Channels and blend width; the scale follows the controller.
    pub codec: CodecConfig,
    pub forward_trace: LinkTrace,
    pub forward: LinkConfig,
    pub reverse_trace: LinkTrace,
    pub reverse: LinkConfig,
    pub playout_delay_ms: u64,
    pub loss_policy: LossPolicyConfig,
    pub hysteresis: HysteresisConfig,
    /// Replaces the anchors computed from the stream geometry.
    pub anchors: Option<RateAnchors>,
    /// Estimate used before the first report; defaults to the 3x anchor.
    pub initial_bps: Option<f64>,
    pub report_interval_ms: u64,
    pub estimator_window: usize,
    /// Pacer rate as a multiple of the current estimate.
    pub pacing_gain: f64,
    /// Fraction of the residual budget actually spent.
    pub budget_headroom: f64,
    pub max_residual_bytes: usize,
    pub quant_step: f32,
    pub ladder: ThetaLadder,
    /// Truncates the content to this many milliseconds.
    pub duration_ms: Option<u64>,
    /// Extra time after the last GoP during which reports keep flowing.
    pub tail_ms: u64,
}

impl SessionConfig {
    /// Forward path over `trace` with Bernoulli `loss_rate`; the reverse path
    /// is loss-free and fast.
    pub fn new(forward_trace: LinkTrace, loss_rate: f64, seed: u64) -> Self {
        Self {
            codec: CodecConfig::default(),
            forward_trace,
            forward: LinkConfig {
                loss_rate,
                seed,
                ..Default::default()
            },
            reverse_trace: LinkTrace::constant(10.0e6, 1000).expect("constant trace"),
            reverse: LinkConfig {
                seed: seed ^ 0x5eed,
                ..Default::default()
            },
            playout_delay_ms: 120,
            loss_policy: LossPolicyConfig::default(),
            hysteresis: HysteresisConfig::default(),
            anchors: None,
            initial_bps: None,
            report_interval_ms: DEFAULT_REPORT_INTERVAL_MS,
            estimator_window: DEFAULT_WINDOW,
            pacing_gain: 1.15,
            budget_headroom: 0.95,
            max_residual_bytes: 24_000,
            quant_step: DEFAULT_QUANT_STEP,
            ladder: ThetaLadder::default(),
            duration_ms: None,
            tail_ms: 2_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(0.0..=MAX_LOSS_RATE).contains(&self.forward.loss_rate) {
            return bad(format!("loss rate {} outside [0, {MAX_LOSS_RATE}]", self.forward.loss_rate));
        }
        if !(0.0..=MAX_LOSS_RATE).contains(&self.reverse.loss_rate) {
            return bad(format!("reverse loss rate {} outside [0, {MAX_LOSS_RATE}]", self.reverse.loss_rate));
        }
        if self.report_interval_ms == 0 || self.estimator_window == 0 {
            return bad("report interval and estimator window must be positive".into());
        }
        if !(self.pacing_gain >= 1.0) || !(self.budget_headroom > 0.0 && self.budget_headroom <= 1.0) {
            return bad(format!("pacing gain {} / headroom {}", self.pacing_gain, self.budget_headroom));
        }
        if !(self.quant_step > 0.0) {
            return bad(format!("quant step {}", self.quant_step));
        }
        if self.codec.channels == 0 || !self.codec.channels.is_multiple_of(3) || !(1..=8).contains(&self.codec.blend_width) {
            return bad(format!("codec config {:?}", self.codec));
        }
        if self.initial_bps.is_some_and(|b| !(b > 0.0)) {
            return bad("initial estimate must be positive".into());
        }
        Ok(())
    }

    /// Round-trip propagation the receiver budgets for a Nack.
    pub fn rtt_ms(&self) -> u64 {
        self.forward.prop_delay_ms + self.reverse.prop_delay_ms
    }
}
