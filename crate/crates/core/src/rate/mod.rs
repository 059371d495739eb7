//! Bandwidth-driven mode selection, anchor rates and the receiver-side
//! delivery-rate estimator.

mod anchors;
mod controller;
mod estimator;
mod theta;

pub use anchors::{compute_anchors, gop_token_bytes, RateAnchors};
pub use controller::{
    decide, raw_mode, select_mode, HysteresisConfig, HysteresisState, Mode, RateController, RateDecision,
};
pub use estimator::{DeliverySampler, EstimatorState, DEFAULT_REPORT_INTERVAL_MS, DEFAULT_WINDOW};
pub use theta::{fit_theta, ThetaFit, ThetaLadder};
