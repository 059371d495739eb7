use serde::{Deserialize, Serialize};

use super::anchors::RateAnchors;
use crate::select::drop_rate_for_bandwidth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    ExtremeLow,
    Low,
    Sufficient,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::ExtremeLow => "extreme_low",
            Mode::Low => "low",
            Mode::Sufficient => "sufficient",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "extreme_low" => Mode::ExtremeLow,
            "low" => Mode::Low,
            "sufficient" => Mode::Sufficient,
            _ => return None,
        })
    }

    pub fn scale(self) -> u8 {
        match self {
            Mode::Sufficient => 2,
            _ => 3,
        }
    }

    /// Bandwidth at which this mode starts.
    fn lower_boundary(self, a: &RateAnchors) -> f64 {
        match self {
            Mode::ExtremeLow => 0.0,
            Mode::Low => a.r_3x,
            Mode::Sufficient => a.r_2x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDecision {
    pub mode: Mode,
    pub scale: u8,
    pub drop_rate: f64,
    pub residual_budget_bps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisConfig {
    pub enabled: bool,
    pub delta_up: f64,
    pub delta_down: f64,
    /// Consecutive reports needed before switching up.
    pub up_reports: u32,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            delta_up: 0.10,
            delta_down: 0.05,
            up_reports: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HysteresisState {
    up_streak: u32,
}

/// The three-branch mode choice with no hysteresis.
pub fn raw_mode(b_avail: f64, a: &RateAnchors) -> Mode {
    if b_avail < a.r_3x {
        Mode::ExtremeLow
    } else if b_avail < a.r_2x {
        Mode::Low
    } else {
        Mode::Sufficient
    }
}

fn mode_with_margin(b_avail: f64, a: &RateAnchors, factor: f64, strict: bool) -> Mode {
    let passes = |m: Mode| {
        let edge = m.lower_boundary(a) * factor;
        if strict {
            b_avail > edge
        } else {
            b_avail >= edge
        }
    };
    if passes(Mode::Sufficient) {
        Mode::Sufficient
    } else if passes(Mode::Low) {
        Mode::Low
    } else {
        Mode::ExtremeLow
    }
}

/// Decision parameters for a fixed mode at bandwidth `b_avail`.
pub fn decide(mode: Mode, b_avail: f64, a: &RateAnchors) -> RateDecision {
    let b = b_avail.max(0.0);
    match mode {
        Mode::ExtremeLow => RateDecision {
            mode,
            scale: 3,
            drop_rate: drop_rate_for_bandwidth(b, a.r_3x),
            residual_budget_bps: 0.0,
        },
        Mode::Low => RateDecision {
            mode,
            scale: 3,
            drop_rate: 0.0,
            residual_budget_bps: (b - a.r_3x).max(0.0),
        },
        Mode::Sufficient => RateDecision {
            mode,
            scale: 2,
            drop_rate: 0.0,
            residual_budget_bps: (b - a.r_2x).max(0.0),
        },
    }
}

/// Picks the operating mode for one bandwidth report.
///
/// Downward moves happen on the first report below `boundary * (1 - delta_down)`;
/// upward moves need `up_reports` consecutive reports above
/// `boundary * (1 + delta_up)`.
pub fn select_mode(
    b_avail: f64,
    anchors: &RateAnchors,
    prev: &RateDecision,
    state: &mut HysteresisState,
    cfg: &HysteresisConfig,
) -> RateDecision {
    if !cfg.enabled {
        state.up_streak = 0;
        return decide(raw_mode(b_avail, anchors), b_avail, anchors);
    }
    let current = prev.mode;
    let down = mode_with_margin(b_avail, anchors, 1.0 - cfg.delta_down, false);
    if down < current {
        state.up_streak = 0;
        return decide(down, b_avail, anchors);
    }
    let up = mode_with_margin(b_avail, anchors, 1.0 + cfg.delta_up, true);
    if up > current {
        state.up_streak += 1;
        if state.up_streak >= cfg.up_reports {
            state.up_streak = 0;
            return decide(up, b_avail, anchors);
        }
    } else {
        state.up_streak = 0;
    }
    decide(current, b_avail, anchors)
}

/// Stateful wrapper feeding each bandwidth report through [`select_mode`].
#[derive(Clone, Debug)]
pub struct RateController {
    anchors: RateAnchors,
    hysteresis: HysteresisConfig,
    state: HysteresisState,
    decision: RateDecision,
    switches: u32,
}

impl RateController {
    pub fn new(anchors: RateAnchors, hysteresis: HysteresisConfig, initial_bps: f64) -> Self {
        Self {
            decision: decide(raw_mode(initial_bps, &anchors), initial_bps, &anchors),
            anchors,
            hysteresis,
            state: HysteresisState::default(),
            switches: 0,
        }
    }

    pub fn anchors(&self) -> &RateAnchors {
        &self.anchors
    }

    pub fn decision(&self) -> &RateDecision {
        &self.decision
    }

    pub fn switches(&self) -> u32 {
        self.switches
    }

    /// Returns the previous mode when this report changed it.
    pub fn on_report(&mut self, b_avail: f64) -> Option<Mode> {
        let before = self.decision.mode;
        self.decision = select_mode(b_avail, &self.anchors, &self.decision, &mut self.state, &self.hysteresis);
        if self.decision.mode != before {
            self.switches += 1;
            Some(before)
        } else {
            None
        }
    }
}
