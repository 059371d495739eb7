//! Discrete-event streaming session: sender, emulated forward and reverse
//! links, receiver, and metrics rebuilt from the event log.

mod config;
mod log;
mod metrics;
mod sim;

pub use self::log::{EventLog, EventType, LogEvent};
pub use config::{SessionConfig, MAX_LOSS_RATE, ON_TIME_MS};
pub use metrics::{
    metrics_csv_string, metrics_from_log, rate_windows, summarize, write_metrics_csv, GopMetrics, RateWindow,
    SessionSummary,
};
pub use sim::{run_session, run_session_with, SessionOutput};
