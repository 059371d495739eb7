pub mod codec;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod netem;
pub mod rate;
pub mod residual;
pub mod select;
pub mod session;
pub mod synth;
pub mod transport;
pub mod video;

pub use error::{Error, Result};
